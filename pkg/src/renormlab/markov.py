"""The induced Markov map F, its inverse branches and distortion of compositions.

Level ``n`` of the partition holds the two components ``J_n`` (positive side)
and ``J_-n`` (negative side) of ``I_n \\ I_(n+1)``; on both, ``F = f^(2^n)``.
Levels ``0..n_max`` are explicit and ``I_(n_max+1)`` is the residual cell.

The extension domain of the inverse branch at level ``n >= 1`` is the image
of the full monotone lap of ``f^(2^n)`` around ``J_n``, which is the hull of
``L_(n+1)`` and ``M_n``. At level 0 the lap is cut at ``|x| = 1 + margin``.
"""

from __future__ import annotations

import csv
import enum
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import (
    BoundaryPoint,
    ExtensionNotMonotone,
    InvalidParameter,
    InvariantViolation,
    OutOfImage,
    ResidualPoint,
)
from .numerics import Interval, Jet3, find_root_bracketed, jet_compose
from .scaffold import Scaffold

BOUNDARY_TOL = 1e-12
CONTAIN_RTOL = 1e-10
LEVEL0_MARGIN = 0.1  # times |I_0|
KOEBE_GRID = 2048
WORD_CSV_COLUMNS = ("word", "|D(g_w)|", "sup_N_times_D", "derivative_ratio", "sup_dlog_times_D")


class Side(str, enum.Enum):
    POS = "pos"
    NEG = "neg"

    @property
    def sign(self) -> float:
        return 1.0 if self is Side.POS else -1.0


class BranchId(NamedTuple):
    level: int
    side: Side

    def __str__(self) -> str:
        return f"{self.level}" if self.side is Side.POS else f"-{self.level}"

    @classmethod
    def parse(cls, text: str) -> "BranchId":
        text = text.strip()
        if text.startswith("-"):
            return cls(int(text[1:]), Side.NEG)
        return cls(int(text), Side.POS)


@dataclass(frozen=True)
class Branch:
    id: BranchId
    domain: Interval
    iterate_count: int
    image: Interval
    extension: Interval
    # F at domain.lo / domain.hi, in that order
    f_lo: float
    f_hi: float

    @property
    def increasing(self) -> bool:
        return self.f_hi > self.f_lo


Word = tuple  # non-empty tuple of BranchId


def word_str(word) -> str:
    return " ".join(str(b) for b in word)


@dataclass(frozen=True)
class Partition:
    scaffold: Scaffold
    n_max: int
    branches: tuple[Branch, ...]
    _index: dict = field(repr=False, compare=False, default_factory=dict)

    def __post_init__(self):
        self._index.update({b.id: b for b in self.branches})

    def branch(self, bid: BranchId) -> Branch:
        try:
            return self._index[bid]
        except KeyError:
            raise InvalidParameter(f"no branch {bid} in a partition of depth {self.n_max}") from None

    @property
    def residual(self) -> Interval:
        return self.scaffold.I(self.n_max + 1)

    @property
    def radii(self) -> np.ndarray:
        """``|p_0| > |p_1| > ... > |p_(n_max+1)|``."""
        return np.abs(np.asarray(self.scaffold.p[: self.n_max + 2], dtype=float))

    def endpoints(self) -> np.ndarray:
        r = self.radii
        return np.concatenate([-r, r[::-1]])

    def locate(self, x: float) -> BranchId:
        """Branch containing x; raises ResidualPoint / BoundaryPoint."""
        r = self.radii
        ax = abs(x)
        hit = np.nonzero(np.abs(ax - r) <= BOUNDARY_TOL)[0]
        if hit.size:
            return _raise_boundary(x, r[hit[0]])
        if ax < r[-1]:
            raise ResidualPoint(f"{x!r} lies in the residual cell I_{self.n_max + 1}")
        if ax > r[0]:
            raise InvalidParameter(f"{x!r} lies outside [-1, 1]")
        n = int(np.searchsorted(-r, -ax)) - 1
        return BranchId(n, Side.POS if x > 0 else Side.NEG)


def _raise_boundary(x: float, radius: float):
    raise BoundaryPoint(x, math.copysign(radius, x))


def _precise(spec, x: float, k: int) -> float:
    fam, t, lam, a = spec.params
    return float(K.iterate_values_dd(fam, t, lam, a, np.array([x]), k)[0])


def build_partition(scaffold: Scaffold, n_max: int) -> Partition:
    """Branches J_(+-n) for levels 0..n_max; the residual is I_(n_max+1)."""
    if n_max < 0 or scaffold.depth < n_max + 1:
        raise InvalidParameter(f"partition depth {n_max} needs a scaffold of depth >= {n_max + 1}")
    spec = scaffold.spec
    p = scaffold.p
    branches = []
    for n in range(n_max + 1):
        k = 2**n
        r_out, r_in = abs(p[n]), abs(p[n + 1])
        ext = _extension(scaffold, n)
        for side in (Side.NEG, Side.POS):
            lo, hi = sorted((side.sign * r_in, side.sign * r_out))
            f_lo, f_hi = _precise(spec, lo, k), _precise(spec, hi, k)
            branches.append(
                Branch(BranchId(n, side), Interval(lo, hi), k, Interval.between(f_lo, f_hi), ext, f_lo, f_hi)
            )
    return Partition(scaffold, n_max, tuple(branches))


def _extension(scaffold: Scaffold, n: int) -> Interval:
    if n == 0:
        spec = scaffold.spec
        edge = 1.0 + LEVEL0_MARGIN * scaffold.I(0).length
        return Interval.between(spec(edge), float(scaffold.c[1]))
    return scaffold.L(n + 1).hull(scaffold.M(n))


# -- evaluation -------------------------------------------------------------


def apply_F(partition: Partition, x: float) -> tuple[float, BranchId]:
    bid = partition.locate(float(x))
    spec = partition.scaffold.spec
    return float(spec.iterate(float(x), 2**bid.level)), bid


def _inverse_values(partition: Partition, branch: Branch, ys: np.ndarray) -> np.ndarray:
    fam, t, lam, a = partition.scaffold.spec.params
    d = branch.domain
    return K.invert_monotone_many(fam, t, lam, a, branch.iterate_count, d.lo, d.hi, branch.f_lo, branch.f_hi, ys)


def invert_branch(partition: Partition, branch: Branch | BranchId, y: float) -> float:
    """The unique x in the branch domain with ``F(x) = y``."""
    if isinstance(branch, BranchId):
        branch = partition.branch(branch)
    img = branch.image
    if not img.contains(y, tol=CONTAIN_RTOL * img.length):
        raise OutOfImage(f"{y!r} is outside the image {img.to_list()} of branch {branch.id}")
    return float(_inverse_values(partition, branch, np.array([float(y)]))[0])


def inverse_jets(partition: Partition, branch: Branch, ys: np.ndarray) -> tuple[np.ndarray, Jet3]:
    """Preimages ``x = g(ys)`` and the jets of the inverse branch g at ys."""
    fam, t, lam, a = partition.scaffold.spec.params
    ys = np.ascontiguousarray(ys, dtype=float)
    xs = _inverse_values(partition, branch, ys)
    _, d1, d2, d3, *_ = K.iterate_jets(fam, t, lam, a, xs, branch.iterate_count, np.inf)
    inv = Jet3(xs, d1, d2, d3).inverse()
    return xs, Jet3(xs, inv.d1, inv.d2, inv.d3)


# -- combinatorics ----------------------------------------------------------


def successors(partition: Partition, branch: Branch | BranchId) -> list[BranchId]:
    """Branches whose domain lies inside ``F(branch domain)``."""
    if isinstance(branch, BranchId):
        branch = partition.branch(branch)
    img = branch.image
    return [b.id for b in partition.branches if img.contains_interval(b.domain, rtol=CONTAIN_RTOL)]


def successor_table(partition: Partition) -> dict[BranchId, tuple[BranchId, ...]]:
    return {b.id: tuple(successors(partition, b)) for b in partition.branches}


def enumerate_words(partition: Partition, k: int, level_cap: int | None = None) -> list[tuple]:
    """All admissible words of length k with levels at most ``level_cap``."""
    if k < 1:
        raise InvalidParameter("word length must be >= 1")
    cap = partition.n_max if level_cap is None else min(level_cap, partition.n_max)
    table = successor_table(partition)
    words = [(b.id,) for b in partition.branches if b.id.level <= cap]
    for _ in range(k - 1):
        words = [w + (s,) for w in words for s in table[w[-1]] if s.level <= cap]
    for w in words:
        if not is_level_monotone(w):
            raise InvariantViolation(f"admissible word {word_str(w)} decreases in level")
    return words


def is_level_monotone(word) -> bool:
    return all(a.level <= b.level for a, b in zip(word, word[1:]))


def markov_defects(partition: Partition) -> dict[BranchId, float]:
    """Distance of each image endpoint to the nearest partition endpoint."""
    ends = partition.endpoints()
    return {
        b.id: max(float(np.min(np.abs(ends - e))) for e in (b.image.lo, b.image.hi)) for b in partition.branches
    }


# -- distortion -------------------------------------------------------------


@dataclass(frozen=True)
class Cylinder:
    word: tuple
    gw_domain: Interval
    cylinder: Interval
    sup_N_times_D: float
    derivative_ratio: float
    # sup |g''/g'| * |D(g_w)|: the log-derivative form, which bounds log(derivative_ratio)
    sup_dlog_times_D: float

    def to_row(self) -> dict:
        return {
            "word": word_str(self.word),
            "|D(g_w)|": self.gw_domain.length,
            "sup_N_times_D": self.sup_N_times_D,
            "derivative_ratio": self.derivative_ratio,
            "sup_dlog_times_D": self.sup_dlog_times_D,
        }


def _sample_points(interval: Interval, samples: int) -> np.ndarray:
    return np.linspace(interval.lo, interval.hi, samples)


def word_cylinder_and_distortion(partition: Partition, word, samples: int = 9) -> Cylinder:
    """Cylinder of ``word`` and the distortion of ``g_w`` on ``D(g_w)``."""
    word = tuple(word)
    _check_admissible(partition, word)
    last = partition.branch(word[-1])
    ys = _sample_points(last.image, samples)
    xs, jet = inverse_jets(partition, last, ys)
    for bid in reversed(word[:-1]):
        xs, outer = inverse_jets(partition, partition.branch(bid), xs)
        jet = jet_compose(outer, jet)
    return _cylinder_from(word, last.image, jet)


def _check_admissible(partition: Partition, word) -> None:
    table = successor_table(partition)
    for a, b in zip(word, word[1:]):
        if b not in table[a]:
            raise InvalidParameter(f"word {word_str(word)} is not admissible at {a} -> {b}")


def _cylinder_from(word, domain: Interval, jet: Jet3) -> Cylinder:
    d1 = np.abs(np.asarray(jet.d1))
    nl = np.abs(np.asarray(jet.nonlinearity))
    dlog = np.abs(np.asarray(jet.d2) / np.asarray(jet.d1))
    vs = np.asarray(jet.v)
    return Cylinder(
        word,
        domain,
        Interval.between(float(vs[0]), float(vs[-1])),
        float(np.max(nl) * domain.length),
        float(np.max(d1) / np.min(d1)),
        float(np.max(dlog) * domain.length),
    )


def word_distortions(partition: Partition, k_max: int, level_cap: int | None = None, samples: int = 9):
    """Cylinders of every admissible word of length ``1..k_max``, batched.

    Words are built by prepending symbols: ``g_(b w') = g_b o g_(w')``, so all
    words sharing a first symbol are inverted through that branch in one call.
    Returns ``{k: list of Cylinder}``.
    """
    cap = partition.n_max if level_cap is None else min(level_cap, partition.n_max)
    table = successor_table(partition)
    active = [b for b in partition.branches if b.id.level <= cap]
    # current layer: words and their g_w jets at the samples of D(g_w)
    words: list[tuple] = []
    vals, d1s, d2s, d3s = [], [], [], []
    for b in active:
        xs, jet = inverse_jets(partition, b, _sample_points(b.image, samples))
        words.append((b.id,))
        vals.append(xs)
        d1s.append(jet.d1)
        d2s.append(jet.d2)
        d3s.append(jet.d3)
    V, D1, D2, D3 = (np.array(z) for z in (vals, d1s, d2s, d3s))
    out = {1: _layer_cylinders(partition, words, V, D1, D2, D3)}
    for k in range(2, k_max + 1):
        first = np.array([active.index(partition.branch(w[0])) for w in words])
        nwords, parts = [], []
        for bi, b in enumerate(active):
            allowed = [active.index(partition.branch(s)) for s in table[b.id] if s.level <= cap]
            sel = np.nonzero(np.isin(first, allowed))[0]
            if sel.size == 0:
                continue
            xs, outer = inverse_jets(partition, b, V[sel].ravel())
            shape = (sel.size, samples)
            jet = jet_compose(outer, Jet3(V[sel].ravel(), D1[sel].ravel(), D2[sel].ravel(), D3[sel].ravel()))
            parts.append(tuple(np.reshape(z, shape) for z in (xs, jet.d1, jet.d2, jet.d3)))
            nwords.extend((b.id,) + words[i] for i in sel)
        words = nwords
        V, D1, D2, D3 = (np.concatenate([p[j] for p in parts]) for j in range(4))
        out[k] = _layer_cylinders(partition, words, V, D1, D2, D3)
    return out


def _layer_cylinders(partition, words, V, D1, D2, D3) -> list[Cylinder]:
    cyl = []
    for i, w in enumerate(words):
        dom = partition.branch(w[-1]).image
        cyl.append(_cylinder_from(w, dom, Jet3(V[i], D1[i], D2[i], D3[i])))
    return cyl


# -- Koebe space --------------------------------------------------------------


def koebe_space(partition: Partition, branch: Branch | BranchId, grid_n: int = KOEBE_GRID) -> float:
    """Relative collar ``min(|left|, |right|) / |D(g)|`` of the extension domain.

    Before measuring, F must be shown to extend monotonically from the branch
    domain onto the whole extension interval.
    """
    if isinstance(branch, BranchId):
        branch = partition.branch(branch)
    ext, dom = branch.extension, branch.image
    if not ext.contains_interval(dom, rtol=CONTAIN_RTOL):
        raise ExtensionNotMonotone(f"extension of {branch.id} does not contain its domain")
    _check_monotone_extension(partition, branch, grid_n)
    left = dom.lo - ext.lo
    right = ext.hi - dom.hi
    return max(0.0, min(left, right)) / dom.length


def _lap_limits(partition: Partition, branch: Branch) -> tuple[float, float]:
    """Search limits on either side of the branch domain (same sign as the branch)."""
    sc = partition.scaffold
    n = branch.id.level
    s = branch.id.side.sign
    outer = 1.0 + LEVEL0_MARGIN * sc.I(0).length if n == 0 else abs(sc.p[n - 1])
    return sorted((0.0, s * outer))


def _check_monotone_extension(partition: Partition, branch: Branch, grid_n: int) -> None:
    spec = partition.scaffold.spec
    fam, t, lam, a = spec.params
    k = branch.iterate_count
    lo_lim, hi_lim = _lap_limits(partition, branch)
    dom, ext = branch.domain, branch.extension
    tol = 1e-9 * ext.length
    inc = branch.increasing
    for start, stop, start_val in ((dom.lo, lo_lim, branch.f_lo), (dom.hi, hi_lim, branch.f_hi)):
        # which end of the extension this walk must reach
        outward_up = (stop > start) == inc
        target = ext.hi if outward_up else ext.lo
        xs = np.linspace(start, stop, grid_n)
        ys = K.iterate_values(fam, t, lam, a, xs, k)
        steps = np.diff(ys)
        ok = steps > 0 if outward_up else steps < 0
        bad = np.nonzero(~ok)[0]
        if bad.size == 0:
            reach = ys[-1]
        else:
            j = int(bad[0])
            reach = _lap_extreme(fam, t, lam, a, k, xs[max(j - 1, 0)], xs[min(j + 1, grid_n - 1)], ys[j])
        short = (target - reach) if outward_up else (reach - target)
        if short > tol:
            raise ExtensionNotMonotone(
                f"f^{k} is not monotone from branch {branch.id} onto its extension "
                f"(reaches {reach:.12g}, needs {target:.12g})"
            )


def _lap_extreme(fam, t, lam, a, k, lo, hi, fallback) -> float:
    """Value of ``f^k`` at its critical point inside ``[lo, hi]``."""

    def deriv(x):
        return K.iterate_d1(fam, t, lam, a, float(x), k)[1]

    try:
        z = find_root_bracketed(deriv, (lo, hi))
    except Exception:  # no sign change of the derivative: grid noise
        return float(fallback)
    return float(K.iterate_values_dd(fam, t, lam, a, np.array([z]), k)[0])


# -- reports ------------------------------------------------------------------


def branch_rows(partition: Partition) -> list[dict]:
    rows = []
    defects = markov_defects(partition)
    table = successor_table(partition)
    for b in partition.branches:
        single = word_cylinder_and_distortion(partition, (b.id,))
        rows.append(
            {
                "branch": str(b.id),
                "level": b.id.level,
                "domain": b.domain.to_list(),
                "image": b.image.to_list(),
                "extension": b.extension.to_list(),
                "successors": [str(s) for s in table[b.id]],
                "markov_defect": defects[b.id],
                "koebe_space": koebe_space(partition, b),
                "sup_N_times_D": single.sup_N_times_D,
                "derivative_ratio": single.derivative_ratio,
            }
        )
    return rows


def words_to_csv(cylinders) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(WORD_CSV_COLUMNS)
    for c in cylinders:
        r = c.to_row()
        w.writerow([r[col] if isinstance(r[col], str) else repr(float(r[col])) for col in WORD_CSV_COLUMNS])
    return buf.getvalue()


def words_to_json(cylinders) -> str:
    return json.dumps([c.to_row() for c in cylinders], sort_keys=True)
