import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from renormlab.errors import InvalidParameter, OrbitEscape
from renormlab.maps import MapSpec, iterate_jet, make_map, nonlinearity_h, schwarzian_h

lams = st.floats(0.05, 0.95)


def test_affine_closed_form():
    f = make_map("affine", 2.0, 0.7)
    xs = np.linspace(-1, 1, 11)
    assert np.allclose(f(xs), 0.7 - 1.7 * xs**2, atol=1e-15)


def test_moebius_closed_form():
    lam, a = 0.6, 1.0
    f = make_map("moebius", 2.0, lam, a)
    x = 0.37
    u = -(x**2)
    want = ((lam + 1) * 1.5 * u + lam) / (1 - 0.5 * (lam + 1) * u)
    assert f(x) == pytest.approx(want, rel=1e-15)


@given(lams, st.floats(0.0, 2.0))
def test_moebius_normalisation(lam, a):
    spec = make_map("moebius", 2.0, lam, a)
    h = spec.h_jet(-1.0)
    assert h.v == pytest.approx(-1.0, abs=1e-14)
    assert spec.h_jet(0.0).v == pytest.approx(lam, abs=1e-15)
    assert h.nonlinearity == pytest.approx(a, abs=1e-12)


@given(lams, st.floats(0.0, 2.0), st.floats(-1.0, 0.0))
def test_h_has_vanishing_schwarzian(lam, a, u):
    spec = make_map("moebius", 2.0, lam, a)
    assert schwarzian_h(spec, u) == pytest.approx(0.0, abs=1e-11)


def test_affine_h_is_linear():
    spec = make_map("affine", 2.5, 0.5)
    assert nonlinearity_h(spec, -0.3) == 0.0


@given(lams, st.floats(1.5, 4.0), st.floats(-1.0, 1.0))
def test_map_is_even(lam, t, x):
    f = make_map("affine", t, lam)
    assert f(x) == f(-x)


@pytest.mark.parametrize(
    "args",
    [
        ("affine", 0.5, 0.5),
        ("affine", 2.0, 1.5),
        ("affine", 2.0, 0.5, 1.0),
        ("moebius", 2.0, 0.5, -1.0),
        ("quartic", 2.0, 0.5),
    ],
)
def test_invalid_parameters_rejected(args):
    with pytest.raises(InvalidParameter):
        make_map(*args)


def test_json_roundtrip():
    spec = make_map("moebius", 2.0, 0.6215313459215062, 1.0)
    assert MapSpec.from_json(spec.to_json()) == spec


def test_missing_field_in_dict():
    with pytest.raises(InvalidParameter):
        MapSpec.from_dict({"family": "affine", "t": 2})


def test_jet_at_critical_point_is_partial_for_small_t():
    j = make_map("affine", 2.5, 0.5).jet(0.0)
    assert j.partial and j.v == 0.5 and j.d1 == 0.0
    assert not make_map("affine", 4.0, 0.5).jet(0.0).partial


def test_second_iterate_jet_against_closed_form():
    lam = 0.7
    f = make_map("affine", 2.0, lam)
    x = 0.3
    # f^2 is a quartic polynomial; differentiate it exactly
    p = np.polynomial.Polynomial([lam, 0.0, -(1 + lam)])
    q = p(p)
    got = iterate_jet(f, x, 2).jet
    assert np.allclose(got.as_tuple(), [q.deriv(k)(x) if k else q(x) for k in range(4)], rtol=1e-13)


def test_iterate_reports_escape():
    f = make_map("affine", 2.0, 0.9)
    # iterates of a point just outside [-1, 1] run off to -infinity
    with pytest.raises(OrbitEscape) as info:
        iterate_jet(f, 1.01, 20)
    assert info.value.step >= 1


def test_precise_iterate_matches_double_for_short_orbits():
    f = make_map("moebius", 2.0, 0.62, 1.0)
    xs = np.linspace(-1, 1, 9)
    assert np.allclose(f.iterate_precise(xs, 8), f.iterate(xs, 8), atol=1e-12)
    assert f.iterate_precise(-1.0, 64) == -1.0


def test_endpoint_orbit_is_fixed():
    f = make_map("affine", 3.0, 0.4)
    assert f(1.0) == pytest.approx(-1.0, abs=2e-16) and f(-1.0) == f(1.0)
    assert math.isinf(f.pole())
