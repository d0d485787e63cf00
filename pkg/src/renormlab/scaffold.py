"""Periodic-point scaffold, renormalisation and the period-doubling cascade.

For a map with period-doubling combinatorics the scaffold consists of

* ``p[0] = -1`` and ``p[n]``, the fixed point of ``f^(2^(n-1))`` strictly
  between 0 and ``-p[n-1]``;
* ``I[n]``, the symmetric interval bounded by ``p[n]`` and ``-p[n]``;
* ``L[n] = f^(2^(n-1))(I[n-1])``, bounded by ``p[n-1]`` and ``c[2^(n-1)]``;
* ``T[n]`` between ``p[n-1]`` and ``p[n]``, and ``M[n] = L[n] \\ T[n]``,
  bounded by ``p[n]`` and ``c[2^(n-1)]``.

Index 0 of ``L``, ``T`` and ``M`` is unused (``None``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import (
    AmbiguousFixedPoint,
    BracketNotFound,
    InvalidParameter,
    InvariantViolation,
    NotRenormalizable,
)
from .maps import Family, MapSpec, make_map
from .numerics import Interval, Jet3, find_root_bracketed, jet_compose, scan_sign_changes

MAX_DEPTH = 10
MAX_CASCADE_DEPTH = 13
RESIDUAL_TOL = 1e-10
ENDPOINT_TOL = 1e-9
H_GRID_CUTOFF = 1e-4


@dataclass(frozen=True)
class Scaffold:
    spec: MapSpec
    depth: int
    p: tuple[float, ...]
    c: np.ndarray = field(repr=False)
    residuals: tuple[float, ...] = field(repr=False, default=())

    def I(self, n: int) -> Interval:  # noqa: E743 - matches the usual notation
        r = abs(self.p[n])
        return Interval(-r, r)

    def L(self, n: int) -> Interval:
        self._check_level(n)
        return Interval.between(self.p[n - 1], float(self.c[2 ** (n - 1)]))

    def T(self, n: int) -> Interval:
        self._check_level(n)
        return Interval.between(self.p[n - 1], self.p[n])

    def M(self, n: int) -> Interval:
        self._check_level(n)
        return Interval.between(self.p[n], float(self.c[2 ** (n - 1)]))

    def _check_level(self, n: int) -> None:
        if not 1 <= n <= self.depth:
            raise IndexError(f"level {n} outside 1..{self.depth}")

    def to_dict(self) -> dict:
        levels = []
        for n in range(self.depth + 1):
            row = {"n": n, "p": self.p[n], "I": self.I(n).to_list()}
            if n >= 1:
                row.update(
                    L=self.L(n).to_list(),
                    T=self.T(n).to_list(),
                    M=self.M(n).to_list(),
                    residual=self.residuals[n],
                )
            levels.append(row)
        return {
            "spec": self.spec.to_dict(),
            "depth": self.depth,
            "levels": levels,
            "critical_values": [float(v) for v in self.c],
        }


class _Stage(NamedTuple):
    p: float
    residual: float


def _fixed_point_stage(spec: MapSpec, n: int, p_prev: float, grid_n: int) -> _Stage:
    """Locate p_n; raises NotRenormalizable / AmbiguousFixedPoint."""
    fam, t, lam, a = spec.params
    k = 2 ** (n - 1)
    if n == 1:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = sorted((0.0, -p_prev))

    def g(x):
        if np.ndim(x):
            return K.iterate_values(fam, t, lam, a, np.ascontiguousarray(x), k) - x
        return K.displacement_dd(fam, t, lam, a, float(x), k)

    # open interval: drop both endpoints of the scan grid
    xs = np.linspace(lo, hi, grid_n + 2)[1:-1]
    found = scan_sign_changes(g, (xs[0], xs[-1]), grid_n)
    brackets = [b for b in found if not b.degenerate]
    exact = [b for b in found if b.degenerate]
    candidates = len(brackets) + len(exact)
    if candidates == 0:
        raise NotRenormalizable(n, f"f^{k}(x) - x has no sign change between {lo:.6g} and {hi:.6g}")
    if candidates > 1:
        raise AmbiguousFixedPoint(n, candidates)
    if exact:
        root = exact[0].lo
    else:
        root = find_root_bracketed(g, brackets[0], tol=1e-3 * np.finfo(float).eps)
    residual = float(g(root))
    return _Stage(root, residual)


def _construct(spec: MapSpec, N: int, grid_n: int = 4096, renorm_tol: float = 1e-12):
    """Yield the scaffold stage by stage; raise on the first failing stage."""
    fam, t, lam, a = spec.params
    c = K.critical_orbit_dd(fam, t, lam, a, 2**N)
    p = [-1.0]
    residuals = [0.0]
    for n in range(1, N + 1):
        stage = _fixed_point_stage(spec, n, p[-1], grid_n)
        pn = stage.p
        if n == 1 and not 0.0 < pn < 1.0:
            raise NotRenormalizable(1, "fixed point p_1 not in (0, 1)")
        cn = c[2**n]
        # f^(2^n)(I_n) inside I_n, with the renormalised critical value >= 0
        if abs(cn) > abs(pn) * (1.0 + renorm_tol):
            raise NotRenormalizable(n, "f^(2^n)(I_n) is not contained in I_n")
        if cn * pn > renorm_tol * pn * pn:
            raise NotRenormalizable(n, "renormalised map has negative critical value")
        if abs(c[2 ** (n - 1)]) <= abs(pn):
            raise NotRenormalizable(n, "return time of I_n is not 2")
        p.append(pn)
        residuals.append(stage.residual)
    return tuple(p), c, tuple(residuals)


def build_scaffold(spec: MapSpec, N: int, max_depth: int = MAX_DEPTH, grid_n: int = 4096) -> Scaffold:
    """Periodic points, critical values and derived intervals to depth N."""
    if N < 0 or N > max_depth:
        raise InvalidParameter(f"depth {N} outside 0..{max_depth}")
    p, c, residuals = _construct(spec, N, grid_n)
    sc = Scaffold(spec, N, p, c, residuals)
    _verify(sc)
    return sc


def _verify(sc: Scaffold) -> None:
    spec = sc.spec
    for n in range(1, sc.depth + 1):
        if abs(sc.residuals[n]) > RESIDUAL_TOL:
            raise InvariantViolation(f"fixed-point residual {sc.residuals[n]:.3g} at level {n}")
        if n >= 2 and not (sc.p[n] * sc.p[n - 1] < 0.0 and abs(sc.p[n]) < abs(sc.p[n - 1])):
            raise InvariantViolation(f"p_{n} does not alternate/nest")
        img = spec.iterate_precise(-sc.p[n - 1], 2 ** (n - 1))
        if abs(img - sc.p[n - 1]) > ENDPOINT_TOL:
            raise InvariantViolation(f"f^(2^{n - 1})(-p_{n - 1}) != p_{n - 1}")
        if not sc.L(n).contains(sc.p[n]):
            raise InvariantViolation(f"p_{n} not in L_{n}")


class RenormCheck(NamedTuple):
    ok: bool
    depth_reached: int
    failed_stage: int | None
    reason: str

    def __bool__(self) -> bool:
        return self.ok


def is_feigenbaum_to_depth(spec: MapSpec, N: int, grid_n: int = 4096) -> RenormCheck:
    """Whether f is renormalisable with return time 2 at every stage 1..N.

    Stage k requires the fixed point p_k strictly inside its search interval,
    ``f^(2^k)(I_k) <= I_k`` with a non-negative renormalised critical value,
    and ``f^(2^(k-1))(I_k)`` not inside ``I_k`` (minimal return time).
    """
    try:
        _construct(spec, N, grid_n)
    except (NotRenormalizable, AmbiguousFixedPoint) as exc:
        return RenormCheck(False, exc.stage - 1, exc.stage, str(exc))
    return RenormCheck(True, N, None, "")


# -- renormalisation ---------------------------------------------------------


@dataclass(frozen=True)
class RenormalizedMap:
    """``f_n(x) = -f^(2^n)(-p_n x) / p_n``, the n-th renormalisation of f."""

    spec: MapSpec
    n: int
    p_n: float

    @property
    def scale(self) -> float:
        return -self.p_n

    def __call__(self, x):
        s = self.scale
        return self.spec.iterate_precise(np.asarray(x, dtype=float) * s, 2**self.n) / s

    def jet(self, x) -> Jet3:
        fam, t, lam, a = self.spec.params
        s = self.scale
        xs = np.ascontiguousarray(np.atleast_1d(np.asarray(x, dtype=float) * s))
        v, d1, d2, d3, *_ = K.iterate_jets(fam, t, lam, a, xs.ravel(), 2**self.n, np.inf)
        if np.ndim(x) == 0:
            raw = Jet3(v[0], d1[0], d2[0], d3[0])
        else:
            raw = Jet3(v, d1, d2, d3)
        return raw.scaled(s, s)


def renormalize(scaffold: Scaffold, n: int, tol: float = 1e-9) -> RenormalizedMap:
    if not 0 <= n <= scaffold.depth:
        raise InvalidParameter(f"level {n} outside scaffold depth {scaffold.depth}")
    fn = RenormalizedMap(scaffold.spec, n, scaffold.p[n])
    if abs(fn(-1.0) + 1.0) > tol or abs(fn(1.0) + 1.0) > tol:
        raise InvariantViolation(f"renormalisation {n} is not normalised")
    return fn


def renorm_h_profile(scaffold: Scaffold, n: int, us) -> np.ndarray:
    """``N(h_n)(u)`` where ``h_n(u) = f_n((-u)^(1/t))``, for ``u < 0``."""
    fn = renormalize(scaffold, n)
    t = scaffold.spec.t
    us = np.asarray(us, dtype=float)
    s = -us
    e = 1.0 / t
    root = Jet3(
        s**e,
        -e * s ** (e - 1.0),
        e * (e - 1.0) * s ** (e - 2.0),
        -e * (e - 1.0) * (e - 2.0) * s ** (e - 3.0),
    )
    return jet_compose(fn.jet(root.v), root).nonlinearity


def renorm_h_nonlinearity_sup(scaffold: Scaffold, n: int, grid_n: int = 1024) -> float:
    us = np.linspace(-1.0, -H_GRID_CUTOFF, grid_n)
    return float(np.max(np.abs(renorm_h_profile(scaffold, n, us))))


# -- period-doubling cascade -----------------------------------------------


def superstable_cascade(family, t: float, a: float = 0.0, depth: int = 10, grid_n: int = 4096) -> list[float]:
    """Superstable parameters lam_1 < lam_2 < ... (0 has exact period 2^k)."""
    if not 1 <= depth <= MAX_CASCADE_DEPTH:
        raise InvalidParameter(f"cascade depth must lie in 1..{MAX_CASCADE_DEPTH}")
    fam = Family(family).code
    lams: list[float] = []
    for k in range(1, depth + 1):
        n = 2**k
        if k == 1:
            lo, hi = 0.0, 1.0
        else:
            prev = lams[-2] if k > 2 else 0.0
            lo, hi = lams[-1], min(lams[-1] + (lams[-1] - prev), 1.0)

        def phi(lam, n=n):
            if np.ndim(lam):
                return K.iterate_values_lam(fam, t, np.ascontiguousarray(lam), a, 0.0, n)
            return K.iterate_value(fam, t, float(lam), a, 0.0, n)

        # lam_{k-1} is itself a root of phi; start one grid cell above it
        grid = np.linspace(lo, hi, grid_n + 1)
        brackets = [b for b in scan_sign_changes(phi, (grid[1], grid[-1]), grid_n) if not b.degenerate]
        if not brackets:
            raise BracketNotFound(k)
        lam_k = find_root_bracketed(phi, brackets[0], tol=1e-3 * np.finfo(float).eps)
        if lams and not lam_k > lams[-1]:
            raise BracketNotFound(k)
        lams.append(lam_k)
    return lams


class FeigenbaumEstimate(NamedTuple):
    lambda_inf: float
    lambdas: list[float]
    deltas: list[float]  # deltas[i] is delta_{i+2}
    alphas: list[float]  # alphas[i] is alpha_{i+1} = |I_{i+1}| / |I_{i+2}|


def aitken(seq) -> float:
    x0, x1, x2 = seq[-3:]
    den = (x2 - x1) - (x1 - x0)
    if den == 0.0:
        return x2
    return x2 - (x2 - x1) ** 2 / den


def feigenbaum_parameter(family, t: float, a: float = 0.0, depth: int = 10) -> FeigenbaumEstimate:
    if depth < 5:
        raise InvalidParameter("depth must be at least 5")
    lams = superstable_cascade(family, t, a, depth)
    deltas = [(lams[k] - lams[k - 1]) / (lams[k + 1] - lams[k]) for k in range(1, len(lams) - 1)]
    lam_inf = aitken(lams)
    spec = make_map(family, t, lam_inf, a)
    sc = build_scaffold(spec, min(depth, MAX_DEPTH))
    alphas = [sc.I(k).length / sc.I(k + 1).length for k in range(1, sc.depth)]
    return FeigenbaumEstimate(lam_inf, lams, deltas, alphas)


def lemma3_solve(t: float, K_: float) -> float:
    """Critical-value lower bound: root in (0, 1) of ``(w+1)(1+K/2) w^(t-1) = 1``."""
    if not t > 1.0 or not K_ >= 0.0:
        raise InvalidParameter("need t > 1 and K >= 0")
    return find_root_bracketed(
        lambda w: (w + 1.0) * (1.0 + 0.5 * K_) * w ** (t - 1.0) - 1.0,
        (0.0, 1.0),
        tol=1e-3 * np.finfo(float).eps,
    )


# -- geometry report ------------------------------------------------------


@dataclass
class GeometryReport:
    rows: list[dict]
    summary: dict

    CSV_COLUMNS = ("n", "ratio_M_I", "ratio_I_I", "sup_N_hn")

    def to_dict(self) -> dict:
        return {"rows": self.rows, "summary": self.summary}


def geometry_report(scaffold: Scaffold, sup_grid_n: int = 256, sup_max_level: int | None = None) -> GeometryReport:
    """Per-level ratios |M_n|/|I_n|, |I_n|/|I_(n-1)| and sup |N(h_n)|."""
    N = scaffold.depth
    cap = N if sup_max_level is None else min(N, sup_max_level)
    rows = []
    for n in range(1, N + 1):
        I_n = scaffold.I(n).length
        row = {
            "n": n,
            "ratio_M_I": scaffold.M(n).length / I_n,
            "ratio_I_I": I_n / scaffold.I(n - 1).length,
            "sup_N_hn": renorm_h_nonlinearity_sup(scaffold, n, sup_grid_n) if n <= cap else None,
        }
        if n < N:
            # J_n is one component of I_n \ I_(n+1); its same-side tail has length |p_(n+1)|
            J_n = abs(scaffold.p[n]) - abs(scaffold.p[n + 1])
            row["gap_ratio_same_side"] = J_n / abs(scaffold.p[n + 1])
            row["gap_ratio_full_tail"] = J_n / scaffold.I(n + 1).length
        rows.append(row)
    sups = [r["sup_N_hn"] for r in rows if r["sup_N_hn"] is not None]
    tail = rows[-3:]
    summary = {
        "min_ratio_M_I": min(r["ratio_M_I"] for r in rows) if rows else None,
        "min_ratio_I_I": min(r["ratio_I_I"] for r in rows) if rows else None,
        "max_sup_N_hn": max(sups) if sups else None,
        "min_gap_ratio": min((r["gap_ratio_same_side"] for r in rows if "gap_ratio_same_side" in r), default=None),
        "ratio_I_I_limit": float(np.mean([r["ratio_I_I"] for r in tail])) if rows else None,
        "ratio_I_I_spread": (max(r["ratio_I_I"] for r in tail) - min(r["ratio_I_I"] for r in tail)) if rows else None,
        "ratio_M_I_rel_spread": (
            (max(r["ratio_M_I"] for r in tail) - min(r["ratio_M_I"] for r in tail))
            / float(np.mean([r["ratio_M_I"] for r in tail]))
            if rows
            else None
        ),
    }
    for r in rows:
        for key in ("ratio_M_I", "ratio_I_I"):
            if not (0.0 < r[key] < 1.0 and math.isfinite(r[key])):
                raise InvariantViolation(f"{key} = {r[key]} at level {r['n']} is outside (0, 1)")
    return GeometryReport(rows, summary)
