import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renormlab.errors import InvalidParameter, NoSignChange
from renormlab.numerics import (
    Interval,
    Jet3,
    bisect_monotone,
    find_root_bracketed,
    jet_compose,
    scan_sign_changes,
)

coef = st.floats(-3.0, 3.0, allow_nan=False)


def poly_jet(c, x):
    """Jet of the cubic c0 + c1 x + c2 x^2 + c3 x^3."""
    c0, c1, c2, c3 = c
    return Jet3(
        c0 + c1 * x + c2 * x * x + c3 * x**3,
        c1 + 2 * c2 * x + 3 * c3 * x * x,
        2 * c2 + 6 * c3 * x,
        6 * c3,
    )


def test_compose_matches_closed_form_for_exp_of_sin():
    x = 0.3
    inner = Jet3(math.sin(x), math.cos(x), -math.sin(x), -math.cos(x))
    e = math.exp(inner.v)
    outer = Jet3(e, e, e, e)
    got = jet_compose(outer, inner)
    s, c = math.sin(x), math.cos(x)
    # d/dx exp(sin x) and its next two derivatives
    want = (
        e,
        e * c,
        e * (c * c - s),
        e * (c**3 - 3 * s * c - c),
    )
    assert np.allclose(got.as_tuple(), want, rtol=1e-14)


@given(st.tuples(coef, coef, coef, coef), st.tuples(coef, coef, coef, coef), st.floats(-1, 1))
def test_compose_agrees_with_polynomial_composition(a, b, x):
    inner = poly_jet(b, x)
    got = jet_compose(poly_jet(a, inner.v), inner)
    # compose coefficient-wise with numpy and differentiate exactly
    pa = np.polynomial.Polynomial(a)
    pb = np.polynomial.Polynomial(b)
    comp = pa(pb)
    want = [comp(x), comp.deriv(1)(x), comp.deriv(2)(x), comp.deriv(3)(x)]
    scale = 1.0 + max(abs(w) for w in want)
    assert np.allclose(got.as_tuple(), want, rtol=1e-9, atol=1e-9 * scale)


@given(st.floats(0.2, 3.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.floats(-1, 1))
def test_inverse_jet_composes_to_identity(d1, d2, d3, x):
    fwd = Jet3(x, d1, d2, d3)
    back = fwd.inverse()
    ident = jet_compose(back, fwd)
    assert ident.d1 == pytest.approx(1.0, rel=1e-12)
    assert ident.d2 == pytest.approx(0.0, abs=1e-10 * (1 + abs(d2)) / d1**2)
    assert ident.d3 == pytest.approx(0.0, abs=1e-9 * (1 + abs(d2) + abs(d3)) ** 2 / d1**4)


def test_moebius_has_zero_schwarzian():
    # u -> (2u + 1) / (u + 3); derivatives are closed form
    u = 0.4
    den = u + 3.0
    jet = Jet3((2 * u + 1) / den, 5 / den**2, -10 / den**3, 30 / den**4)
    assert jet.schwarzian == pytest.approx(0.0, abs=1e-14)
    assert jet.nonlinearity == pytest.approx(-2.0 * den / 5.0, rel=1e-14)


def test_scaled_jet_is_conjugation_by_dilation():
    x, s = 0.25, -0.4
    jet = Jet3(math.sin(s * x), math.cos(s * x), -math.sin(s * x), -math.cos(s * x)).scaled(s, s)
    assert jet.v == pytest.approx(math.sin(s * x) / s)
    assert jet.d1 == pytest.approx(math.cos(s * x))
    assert jet.d2 == pytest.approx(-math.sin(s * x) * s)
    assert jet.d3 == pytest.approx(-math.cos(s * x) * s * s)


def test_interval_basics():
    a = Interval.between(0.5, -0.25)
    assert (a.lo, a.hi) == (-0.25, 0.5)
    assert a.length == 0.75 and a.mid == 0.125
    assert a.contains(0.5) and not a.contains(0.51)
    assert a.contains(0.51, tol=0.02)
    assert a.hull(Interval(1.0, 2.0)) == Interval(-0.25, 2.0)
    assert a.contains_interval(Interval(-0.25, 0.5))
    with pytest.raises(InvalidParameter):
        Interval(1.0, 1.0)


def test_brent_finds_sqrt2():
    root = find_root_bracketed(lambda x: x * x - 2.0, (0.0, 2.0), tol=1e-16)
    assert root == pytest.approx(math.sqrt(2.0), abs=4e-16)


def test_brent_requires_sign_change():
    with pytest.raises(NoSignChange):
        find_root_bracketed(lambda x: x * x + 1.0, (-1.0, 1.0))


def test_scan_finds_every_root_of_cos():
    brackets = scan_sign_changes(np.cos, (0.0, 10.0), 1000)
    roots = [find_root_bracketed(np.cos, b) for b in brackets]
    want = [math.pi / 2 + k * math.pi for k in range(3)]
    assert np.allclose(roots, want, atol=1e-12)


def test_scan_reports_exact_zero_nodes_as_degenerate():
    brackets = scan_sign_changes(lambda x: x, (-1.0, 1.0), 3)
    assert len(brackets) == 1 and brackets[0].degenerate


@given(st.floats(-0.99, 0.99))
@settings(max_examples=50)
def test_bisect_monotone_inverts_cube(y):
    x = bisect_monotone(lambda z: z**3, -1.0, 1.0, np.array([y]), increasing=True)
    assert x[0] ** 3 == pytest.approx(y, abs=1e-14)


def test_bisect_monotone_with_newton_on_decreasing_map():
    ys = np.linspace(-0.9, 0.9, 7)
    xs = bisect_monotone(lambda z: -np.tanh(z), -2.0, 2.0, ys, increasing=False, newton=lambda z: (-np.tanh(z), -1 / np.cosh(z) ** 2))
    assert np.allclose(-np.tanh(xs), ys, atol=1e-15)
