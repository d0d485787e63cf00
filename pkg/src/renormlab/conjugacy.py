"""The conjugacy ``H`` with ``f o H = H o g`` and its quasisymmetry constant.

``H`` is evaluated symbolically. The F-itinerary of x under g is computed
until it becomes precise enough, enters the residual cell, or hits a
partition endpoint. The f-cell with the same label is then pulled back
through the f inverse branches. The pulled-back cell contains the true
``H(x)``, so the distance from the returned value to its far end is a
rigorous bound, up to rounding in the branch inversions.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import CombinatorialMismatch, DepthInsufficient, InvalidParameter
from .maps import MapSpec
from .markov import BOUNDARY_TOL, CONTAIN_RTOL, BranchId, Partition, Side, build_partition, successor_table
from .scaffold import build_scaffold

CONJUGACY_MAX_DEPTH = 16
DEFAULT_DEPTH = 12
DEFAULT_EPS = 1e-13
WORD_CAPS = (16, 32, 64, 128)
QS_GRID = 512
RELIABILITY_FRACTION = 0.05
QS_CSV_COLUMNS = ("d", "max_ratio", "samples", "max_err_bound", "reliable_flag")


def _branch_values(part: Partition) -> tuple[np.ndarray, np.ndarray]:
    lo = np.empty((part.n_max + 1, 2))
    hi = np.empty((part.n_max + 1, 2))
    for b in part.branches:
        s = 1 if b.id.side is Side.POS else 0
        lo[b.id.level, s] = b.f_lo
        hi[b.id.level, s] = b.f_hi
    return lo, hi


@dataclass(frozen=True)
class ConjugacyContext:
    """Two combinatorially identical partitions; ``H`` maps g-space to f-space."""

    f: Partition
    g: Partition
    k: int = WORD_CAPS[-1]
    eps_target: float = DEFAULT_EPS
    _cache: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        if self.f.n_max != self.g.n_max:
            raise CombinatorialMismatch("partitions have different depths")
        tf, tg = successor_table(self.f), successor_table(self.g)
        if tf != tg:
            bad = next(b for b in tf if tf[b] != tg.get(b))
            raise CombinatorialMismatch(f"successor lists differ at branch {bad}")
        self._cache["f_branch"] = _branch_values(self.f)
        self._cache["c_index"] = _first_index(self.g.scaffold.c)

    @property
    def is_self(self) -> bool:
        return self.f.scaffold.spec == self.g.scaffold.spec

    def with_word_cap(self, k: int) -> "ConjugacyContext":
        return ConjugacyContext(self.f, self.g, k, self.eps_target)


def _first_index(values: np.ndarray) -> dict[float, int]:
    out: dict[float, int] = {}
    for j, v in enumerate(values.tolist()):
        out.setdefault(v, j)
    return out


def build_context(
    f_spec: MapSpec,
    g_spec: MapSpec,
    depth: int = DEFAULT_DEPTH,
    k: int = WORD_CAPS[-1],
    eps_target: float = DEFAULT_EPS,
) -> ConjugacyContext:
    """Scaffolds of the given depth for both maps and partitions one level shallower."""
    if not 2 <= depth <= CONJUGACY_MAX_DEPTH:
        raise InvalidParameter(f"conjugacy depth must lie in 2..{CONJUGACY_MAX_DEPTH}")
    sf = build_scaffold(f_spec, depth, max_depth=CONJUGACY_MAX_DEPTH)
    sg = sf if g_spec == f_spec else build_scaffold(g_spec, depth, max_depth=CONJUGACY_MAX_DEPTH)
    pf = build_partition(sf, depth - 1)
    pg = pf if sg is sf else build_partition(sg, depth - 1)
    return ConjugacyContext(pf, pg, k, eps_target)


# -- itineraries ------------------------------------------------------------


class Itinerary(NamedTuple):
    word: tuple
    tag: str  # "complete" | "residual" | "boundary"
    step: int
    endpoint: float | None = None


def itinerary(partition: Partition, x: float, k: int, eps_target: float = 0.0) -> Itinerary:
    """Branches visited by ``x, F(x), F^2(x), ...`` for at most k symbols."""
    if not -1.0 <= x <= 1.0:
        raise InvalidParameter(f"{x!r} lies outside [-1, 1]")
    fam, t, lam, a = partition.scaffold.spec.params
    levels = np.empty(max(k, 1), dtype=np.int64)
    sides = np.empty(max(k, 1), dtype=np.int64)
    radii = partition.radii
    eps = eps_target if eps_target > 0.0 else 1e-300
    j, code, idx, side, _ = K.itinerary_kernel(fam, t, lam, a, radii, float(x), k, BOUNDARY_TOL, eps, levels, sides)
    word = tuple(BranchId(int(levels[i]), Side.POS if sides[i] > 0 else Side.NEG) for i in range(j))
    if code == K.CELL_RESIDUAL:
        return Itinerary(word, "residual", j)
    if code == K.CELL_BOUNDARY:
        return Itinerary(word, "boundary", j, math.copysign(float(radii[idx]), side))
    return Itinerary(word, "complete", j)


# -- evaluation -------------------------------------------------------------


def eval_conjugacy_many(ctx: ConjugacyContext, xs) -> tuple[np.ndarray, np.ndarray]:
    """``H`` and its error bound at each x in ``[-1, 1]``."""
    xs = np.ascontiguousarray(np.atleast_1d(np.asarray(xs, dtype=float)))
    if np.any(np.abs(xs) > 1.0):
        raise InvalidParameter("conjugacy is only defined on [-1, 1]")
    flo, fhi = ctx._cache["f_branch"]
    ys, errs, codes, _, oks = K.conjugacy_kernel(
        ctx.g.scaffold.spec.params,
        ctx.g.radii,
        ctx.f.scaffold.spec.params,
        ctx.f.radii,
        flo,
        fhi,
        xs,
        ctx.k,
        BOUNDARY_TOL,
        ctx.eps_target,
        CONTAIN_RTOL,
    )
    if not np.all(oks):
        i = int(np.argmin(oks))
        raise CombinatorialMismatch(f"the g-itinerary of {xs[i]!r} is not admissible for f")
    # exact scaffold data: critical values c_j of g map to those of f
    c_index = ctx._cache["c_index"]
    fc = ctx.f.scaffold.c
    for i, x in enumerate(xs.tolist()):
        j = c_index.get(x)
        if j is not None:
            ys[i] = fc[j]
            errs[i] = 0.0
    return ys, errs


def eval_conjugacy(ctx: ConjugacyContext, x: float) -> tuple[float, float]:
    y, e = eval_conjugacy_many(ctx, [x])
    return float(y[0]), float(e[0])


# -- quasisymmetry ------------------------------------------------------------


@dataclass(frozen=True)
class QSRow:
    d: float
    max_ratio: float
    samples: int
    max_err_bound: float
    min_increment: float
    reliable: bool
    word_cap: int

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "max_ratio": self.max_ratio,
            "samples": self.samples,
            "max_err_bound": self.max_err_bound,
            "min_increment": self.min_increment,
            "reliable_flag": self.reliable,
            "word_cap": self.word_cap,
        }


@dataclass(frozen=True)
class QSReport:
    rows: tuple[QSRow, ...]

    @property
    def M_hat(self) -> float:
        return max(r.max_ratio for r in self.rows)

    @property
    def all_reliable(self) -> bool:
        return all(r.reliable for r in self.rows)

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows], "M_hat": self.M_hat}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(QS_CSV_COLUMNS)
        for r in self.rows:
            w.writerow([repr(r.d), repr(r.max_ratio), r.samples, repr(r.max_err_bound), int(r.reliable)])
        return buf.getvalue()

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def qs_grid(d: float, grid_n: int = QS_GRID) -> np.ndarray:
    """Uniform grid with ``x +- d`` inside ``[-1, 1]``."""
    if not 0.0 < d < 0.5:
        raise InvalidParameter(f"scale {d} must lie in (0, 0.5)")
    return np.linspace(-1.0 + d, 1.0 - d, grid_n)


def _qs_row(ctx: ConjugacyContext, d: float, grid_n: int) -> QSRow:
    xs = qs_grid(d, grid_n)
    pts = np.concatenate([xs - d, xs, xs + d])
    ys, errs = eval_conjugacy_many(ctx, pts)
    lo, mid, hi = np.split(ys, 3)
    right = hi - mid
    left = mid - lo
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.abs(right) / np.abs(left)
        value = np.maximum(rho, 1.0 / rho)
    min_inc = float(min(np.min(np.abs(right)), np.min(np.abs(left))))
    max_err = float(np.max(errs))
    reliable = bool(np.all(np.isfinite(value)) and max_err <= RELIABILITY_FRACTION * min_inc)
    return QSRow(float(d), float(np.max(value)), int(xs.size), max_err, min_inc, reliable, ctx.k)


def qs_report(ctx: ConjugacyContext, scales, grid_n: int = QS_GRID, word_caps=WORD_CAPS, strict: bool = False) -> QSReport:
    """Per-scale ``max(rho, 1/rho)`` with ``rho = |H(x+d)-H(x)| / |H(x)-H(x-d)|``.

    Each scale is evaluated with increasing word-length caps until the error
    bound is at most 5% of the smallest increment. Scales that never get there
    are flagged unreliable, or raise DepthInsufficient when ``strict``.
    """
    rows = []
    for d in scales:
        row = None
        for k in word_caps:
            row = _qs_row(ctx.with_word_cap(k), float(d), grid_n)
            if row.reliable:
                break
        if not row.reliable and strict:
            raise DepthInsufficient(
                f"scale {d}: error bound {row.max_err_bound:.3g} exceeds "
                f"{RELIABILITY_FRACTION} x min increment {row.min_increment:.3g} at word cap {row.word_cap}"
            )
        rows.append(row)
    return QSReport(tuple(rows))


def conjugacy_defects(ctx: ConjugacyContext, xs) -> tuple[np.ndarray, np.ndarray]:
    """``|f(H(x)) - H(g(x))|`` and the tracked bound ``Lip(f) err(x) + err(g(x))``."""
    xs = np.asarray(xs, dtype=float)
    fspec, gspec = ctx.f.scaffold.spec, ctx.g.scaffold.spec
    hx, ex = eval_conjugacy_many(ctx, xs)
    hgx, egx = eval_conjugacy_many(ctx, gspec(xs))
    lip = lipschitz_bound(fspec)
    lhs = np.abs(fspec(hx) - hgx)
    # rounding slack for the three function evaluations
    bound = lip * ex + egx + 8.0 * np.finfo(float).eps
    return lhs, bound


def lipschitz_bound(spec: MapSpec, grid_n: int = 4097) -> float:
    """``max |f'|`` on ``[-1, 1]``, attained at the endpoints for these families."""
    xs = np.linspace(-1.0, 1.0, grid_n)
    return float(np.max(np.abs(spec.jet(xs).d1)))
