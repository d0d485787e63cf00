"""Closed-form unimodal families ``f = h o Q_t`` with ``Q_t(x) = -|x|**t``.

Two choices of ``h`` are supported, both with identically vanishing
Schwarzian derivative:

* ``affine``:  ``h(u) = (1 + lam) u + lam``, so ``f(x) = lam - (1 + lam)|x|**t``;
* ``moebius``: ``h(u) = ((lam+1)(1+a/2) u + lam) / (1 - (a/2)(lam+1) u)``,
  normalised so that ``h(-1) = -1``, ``h(0) = lam`` and ``N(h)(-1) = a``.

``lam`` is the critical value ``f(0)``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _kernels as K
from .errors import InvalidParameter, OrbitEscape
from .numerics import Jet3

ESCAPE_EPS = 1e-9
EXTENSION_RADIUS = 1.5
VALIDATION_GRID = 1024


class Family(str, enum.Enum):
    AFFINE = "affine"
    MOEBIUS = "moebius"

    @property
    def code(self) -> int:
        return K.AFFINE if self is Family.AFFINE else K.MOEBIUS


@dataclass(frozen=True)
class MapSpec:
    family: Family
    t: float
    lam: float
    a: float = 0.0

    def __post_init__(self):
        try:
            object.__setattr__(self, "family", Family(self.family))
        except ValueError:
            raise InvalidParameter(f"unknown family {self.family!r}") from None
        for name in ("t", "lam", "a"):
            object.__setattr__(self, name, float(getattr(self, name)))
        if not self.t > 1.0:
            raise InvalidParameter(f"critical exponent t must exceed 1, got {self.t}")
        if not 0.0 < self.lam < 1.0:
            raise InvalidParameter(f"lambda must lie in (0, 1), got {self.lam}")
        if not self.a >= 0.0:
            raise InvalidParameter(f"a must be non-negative, got {self.a}")
        if self.family is Family.AFFINE and self.a != 0.0:
            raise InvalidParameter("parameter a only applies to the moebius family")

    @property
    def params(self) -> tuple[int, float, float, float]:
        return (self.family.code, self.t, self.lam, self.a)

    def with_lambda(self, lam: float) -> "MapSpec":
        return MapSpec(self.family, self.t, lam, self.a)

    # -- evaluation ---------------------------------------------------------

    def __call__(self, x):
        return self.iterate(x, 1)

    def iterate(self, x, k: int):
        """Values of ``f^k``; no escape checking."""
        fam, t, lam, a = self.params
        if np.ndim(x) == 0:
            return K.iterate_value(fam, t, lam, a, float(x), int(k))
        xs = np.ascontiguousarray(x, dtype=float)
        return K.iterate_values(fam, t, lam, a, xs.ravel(), int(k)).reshape(xs.shape)

    def iterate_precise(self, x, k: int):
        """Values of ``f^k`` computed in double-double arithmetic."""
        fam, t, lam, a = self.params
        xs = np.ascontiguousarray(np.atleast_1d(x), dtype=float)
        out = K.iterate_values_dd(fam, t, lam, a, xs.ravel(), int(k)).reshape(xs.shape)
        return float(out[0]) if np.ndim(x) == 0 else out

    def jet(self, x) -> Jet3:
        return eval_jet(self, x)

    def h_jet(self, u) -> Jet3:
        fam, _, lam, a = self.params
        if np.ndim(u) == 0:
            return Jet3(*K.h_jet(fam, lam, a, float(u)))
        us = np.asarray(u, dtype=float)
        cols = np.array([K.h_jet(fam, lam, a, float(v)) for v in us.ravel()]).T
        return Jet3(*(c.reshape(us.shape) for c in cols))

    def pole(self) -> float:
        """Pole of the Moebius ``h`` (``inf`` for the affine family)."""
        if self.family is Family.AFFINE or self.a == 0.0:
            return float("inf")
        return 2.0 / (self.a * (self.lam + 1.0))

    # -- serialisation ------------------------------------------------------

    def to_dict(self) -> dict:
        return {"family": self.family.value, "t": self.t, "lambda": self.lam, "a": self.a}

    @classmethod
    def from_dict(cls, d: dict) -> "MapSpec":
        try:
            return make_map(d["family"], d["t"], d["lambda"], d.get("a", 0.0))
        except KeyError as exc:
            raise InvalidParameter(f"map spec is missing field {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MapSpec":
        return cls.from_dict(json.loads(text))


def make_map(family, t: float, lam: float, a: float = 0.0) -> MapSpec:
    """Validated constructor; checks the unimodal normalisation on a grid."""
    spec = MapSpec(family, t, lam, a)
    if spec.pole() <= 0.0:
        raise InvalidParameter("Moebius pole inside the domain of h")
    xs = np.linspace(-1.0, 1.0, VALIDATION_GRID)
    ys = spec(xs)
    if not np.all(np.isfinite(ys)):
        raise InvalidParameter("map is not finite on [-1, 1]")
    if np.max(np.abs(ys - spec(-xs))) > 1e-14:
        raise InvalidParameter("map is not symmetric about 0")
    if abs(spec(-1.0) + 1.0) > 1e-14 or abs(spec(1.0) + 1.0) > 1e-14:
        raise InvalidParameter("map does not fix -1 and send 1 to -1")
    left = xs <= 0.0
    if not (np.all(np.diff(ys[left]) > 0.0) and np.all(np.diff(ys[~left]) < 0.0)):
        raise InvalidParameter("map is not increasing-then-decreasing")
    us = np.linspace(-EXTENSION_RADIUS**spec.t, 0.0, VALIDATION_GRID)
    hj = spec.h_jet(us)
    if not np.all(hj.d1 > 0.0):
        raise InvalidParameter("h is not an increasing diffeomorphism on its extension")
    if np.max(schwarzian_h(spec, us[us >= -1.0])) > 1e-9:
        raise InvalidParameter("h has positive Schwarzian derivative")
    return spec


def eval_jet(spec: MapSpec, x) -> Jet3:
    """Jet of f at x. At the critical point with ``t < 3`` the jet is partial."""
    fam, t, lam, a = spec.params
    if np.ndim(x) == 0:
        v, d1, d2, d3 = K.f_jet(fam, t, lam, a, float(x))
        partial = x == 0.0 and t < 3.0
        if partial:
            v, d1 = lam, 0.0
        return Jet3(v, d1, d2, d3, partial=partial)
    xs = np.ascontiguousarray(x, dtype=float)
    v, d1, d2, d3, *_ = K.iterate_jets(fam, t, lam, a, xs.ravel(), 1, np.inf)
    partial = bool(t < 3.0 and np.any(xs == 0.0))
    shape = xs.shape
    return Jet3(v.reshape(shape), d1.reshape(shape), d2.reshape(shape), d3.reshape(shape), partial=partial)


class IterateResult(NamedTuple):
    jet: Jet3
    orbit_min: float
    orbit_max: float


def iterate_jet(spec: MapSpec, x, k: int, escape_eps: float = ESCAPE_EPS) -> IterateResult:
    """Jet of ``f^k`` at x with orbit extremes.

    Raises OrbitEscape if an intermediate iterate leaves ``[-1-eps, 1+eps]``.
    """
    fam, t, lam, a = spec.params
    xs = np.ascontiguousarray(np.atleast_1d(x), dtype=float)
    v, d1, d2, d3, lo, hi, bad = K.iterate_jets(fam, t, lam, a, xs.ravel(), int(k), escape_eps)
    if np.any(bad >= 0):
        i = int(np.argmax(bad >= 0))
        raise OrbitEscape(int(bad[i]), float(spec.iterate(xs.ravel()[i], int(bad[i]))))
    partial = not bool(np.all(np.isfinite(d2)) and np.all(np.isfinite(d3)))
    if np.ndim(x) == 0:
        return IterateResult(Jet3(v[0], d1[0], d2[0], d3[0], partial), float(lo[0]), float(hi[0]))
    shape = xs.shape
    jet = Jet3(v.reshape(shape), d1.reshape(shape), d2.reshape(shape), d3.reshape(shape), partial)
    return IterateResult(jet, float(lo.min()), float(hi.max()))


def nonlinearity_h(spec: MapSpec, u):
    """``N(h) = h'' / h'^2``."""
    return spec.h_jet(u).nonlinearity


def schwarzian_h(spec: MapSpec, u):
    """``S(h) = h'''/h' - 1.5 (h''/h')^2``."""
    return spec.h_jet(u).schwarzian
