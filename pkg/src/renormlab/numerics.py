"""Order-3 derivative jets, intervals and bracketed 1-D root finding."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidParameter, MaxIterations, NoSignChange

ROOT_TOL = 1e-13
SCAN_GRID = 4096
MAX_BISECTIONS = 200


@dataclass(frozen=True)
class Jet3:
    """Value and first three derivatives of a function at a point.

    Fields may be floats or equally shaped numpy arrays. ``partial`` marks a
    jet whose higher derivatives are undefined at the evaluation point (the
    critical point of ``|x|**t`` with ``t < 3``).
    """

    v: float
    d1: float
    d2: float
    d3: float
    partial: bool = False

    @classmethod
    def identity(cls, x) -> "Jet3":
        one = np.ones_like(x, dtype=float) if np.ndim(x) else 1.0
        return cls(x, one, 0.0 * one, 0.0 * one)

    @classmethod
    def constant(cls, c) -> "Jet3":
        zero = np.zeros_like(c, dtype=float) if np.ndim(c) else 0.0
        return cls(c, zero, zero, zero)

    def compose(self, inner: "Jet3") -> "Jet3":
        """Jet of ``self_function o inner_function``; ``self`` must be taken at ``inner.v``."""
        return jet_compose(self, inner)

    def inverse(self) -> "Jet3":
        """Jet of the local inverse function, taken at the point ``self.v``."""
        d1, d2, d3 = self.d1, self.d2, self.d3
        return Jet3(
            v=self.v,
            d1=1.0 / d1,
            d2=-d2 / d1**3,
            d3=(3.0 * d2 * d2 - d1 * d3) / d1**5,
            partial=self.partial,
        )

    def scaled(self, x_scale: float, y_scale: float) -> "Jet3":
        """Jet of ``x -> F(x_scale * x) / y_scale`` given the jet of F at ``x_scale * x``."""
        return Jet3(
            v=self.v / y_scale,
            d1=self.d1 * x_scale / y_scale,
            d2=self.d2 * x_scale**2 / y_scale,
            d3=self.d3 * x_scale**3 / y_scale,
            partial=self.partial,
        )

    @property
    def nonlinearity(self):
        return self.d2 / self.d1**2

    @property
    def schwarzian(self):
        r = self.d2 / self.d1
        return self.d3 / self.d1 - 1.5 * r * r

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite([np.asarray(c) for c in (self.v, self.d1, self.d2, self.d3)])))

    def as_tuple(self) -> tuple:
        return (self.v, self.d1, self.d2, self.d3)


def jet_compose(outer: Jet3, inner: Jet3) -> Jet3:
    """Faa di Bruno to third order: jet of ``outer o inner``.

    ``outer`` is the jet of the outer function evaluated at ``inner.v``.
    """
    a1, a2, a3 = outer.d1, outer.d2, outer.d3
    b1, b2, b3 = inner.d1, inner.d2, inner.d3
    return Jet3(
        v=outer.v,
        d1=a1 * b1,
        d2=a2 * b1 * b1 + a1 * b2,
        d3=a3 * b1**3 + 3.0 * a2 * b1 * b2 + a1 * b3,
        partial=outer.partial or inner.partial,
    )


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        if not (self.lo < self.hi):
            raise InvalidParameter(f"empty interval [{self.lo!r}, {self.hi!r}]")

    @classmethod
    def between(cls, a: float, b: float) -> "Interval":
        """The closed interval bounded by ``a`` and ``b`` in either order."""
        return cls(min(a, b), max(a, b))

    @property
    def length(self) -> float:
        return self.hi - self.lo

    @property
    def mid(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def contains(self, x: float, tol: float = 0.0) -> bool:
        return self.lo - tol <= x <= self.hi + tol

    def contains_interval(self, other: "Interval", rtol: float = 0.0) -> bool:
        slack = rtol * max(self.length, other.length)
        return self.lo - slack <= other.lo and other.hi <= self.hi + slack

    def hull(self, other: "Interval") -> "Interval":
        return Interval(min(self.lo, other.lo), max(self.hi, other.hi))

    def to_list(self) -> list[float]:
        return [self.lo, self.hi]


class Bracket(NamedTuple):
    lo: float
    hi: float

    @property
    def degenerate(self) -> bool:
        return self.lo == self.hi


def find_root_bracketed(
    fn: Callable[[float], float],
    bracket: Interval | tuple[float, float],
    tol: float = ROOT_TOL,
) -> float:
    """Root of ``fn`` inside a sign-changing bracket (Brent's method).

    The returned root is located to within ``tol * max(1, width)``.
    """
    lo, hi = (bracket.lo, bracket.hi) if isinstance(bracket, Interval) else bracket
    flo, fhi = fn(lo), fn(hi)
    if flo == 0.0:
        return float(lo)
    if fhi == 0.0:
        return float(hi)
    if not (flo * fhi < 0.0) or not (math.isfinite(flo) and math.isfinite(fhi)):
        raise NoSignChange(f"fn({lo!r})={flo!r} and fn({hi!r})={fhi!r} do not bracket a root")
    xtol = tol * max(1.0, abs(hi - lo))
    try:
        return float(brentq(fn, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=MAX_BISECTIONS))
    except RuntimeError as exc:  # brentq signals non-convergence this way
        raise MaxIterations(str(exc)) from exc


def scan_sign_changes(
    fn: Callable,
    interval: Interval | tuple[float, float],
    grid_n: int = SCAN_GRID,
    zero_tol: float = 0.0,
    vectorized: bool = True,
) -> list[Bracket]:
    """All grid cells of ``interval`` across which ``fn`` changes sign.

    Grid nodes where ``|fn| <= zero_tol`` come back as degenerate brackets
    ``(x, x)``; cells touching such a node are not reported separately.
    """
    if grid_n < 2:
        raise InvalidParameter("grid_n must be >= 2")
    lo, hi = (interval.lo, interval.hi) if isinstance(interval, Interval) else interval
    xs = np.linspace(lo, hi, grid_n)
    ys = np.asarray(fn(xs) if vectorized else [fn(float(x)) for x in xs], dtype=float)
    signs = np.sign(ys)
    signs[np.abs(ys) <= zero_tol] = 0.0
    out: list[Bracket] = []
    for i in range(grid_n):
        if signs[i] == 0.0:
            out.append(Bracket(float(xs[i]), float(xs[i])))
        elif i + 1 < grid_n and signs[i] * signs[i + 1] < 0.0:
            out.append(Bracket(float(xs[i]), float(xs[i + 1])))
    return out


def bisect_monotone(fn, lo, hi, targets, increasing: bool, iters: int = 64, newton=None):
    """Vectorised solve of ``fn(x) = targets`` for a monotone ``fn`` on ``[lo, hi]``.

    ``lo``/``hi`` may be scalars or arrays. When ``newton`` is given it must
    return ``(values, derivatives)`` and is used for safeguarded Newton steps;
    iteration stops once every bracket is below a few ulps.
    """
    targets = np.asarray(targets, dtype=float)
    a = np.broadcast_to(np.asarray(lo, dtype=float), targets.shape).copy()
    b = np.broadcast_to(np.asarray(hi, dtype=float), targets.shape).copy()
    sgn = 1.0 if increasing else -1.0
    x = 0.5 * (a + b)
    for _ in range(iters):
        if newton is None:
            fx = fn(x)
            dfx = None
        else:
            fx, dfx = newton(x)
        r = sgn * (fx - targets)
        right = r > 0.0
        b = np.where(right, x, b)
        a = np.where(right, a, x)
        if dfx is not None:
            with np.errstate(divide="ignore", invalid="ignore"):
                xn = x - (fx - targets) / dfx
            ok = np.isfinite(xn) & (xn > a) & (xn < b)
            x = np.where(ok, xn, 0.5 * (a + b))
        else:
            x = 0.5 * (a + b)
        if np.all(b - a <= 4 * np.finfo(float).eps * np.maximum(np.abs(a), np.abs(b)) + 1e-300):
            break
        if dfx is not None and np.all(np.abs(fx - targets) <= 2 * np.finfo(float).eps * (1.0 + np.abs(targets))):
            break
    return x
