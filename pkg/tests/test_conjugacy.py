import numpy as np
import pytest

from renormlab.conjugacy import (
    ConjugacyContext,
    build_context,
    conjugacy_defects,
    eval_conjugacy,
    eval_conjugacy_many,
    itinerary,
    qs_grid,
    qs_report,
)
from renormlab.errors import CombinatorialMismatch, DepthInsufficient, InvalidParameter
from renormlab.markov import BranchId, Side, build_partition, successor_table

DEPTH = 8


@pytest.fixture(scope="module")
def cross(affine_inf, moebius_inf):
    return build_context(moebius_inf, affine_inf, DEPTH)


@pytest.fixture(scope="module")
def self_ctx(affine_inf):
    return build_context(affine_inf, affine_inf, DEPTH)


def test_self_conjugacy_is_identity(self_ctx):
    xs = np.linspace(-1, 1, 301)
    ys, errs = eval_conjugacy_many(self_ctx, xs)
    assert np.all(np.abs(ys - xs) <= errs + 1e-12)


def test_conjugacy_fixes_symmetric_points(cross):
    for x in (-1.0, 0.0, 1.0):
        assert eval_conjugacy(cross, x) == (x, 0.0)


def test_conjugacy_is_odd(cross):
    xs = np.random.default_rng(1).uniform(-1, 1, 300)
    y1, e1 = eval_conjugacy_many(cross, xs)
    y2, e2 = eval_conjugacy_many(cross, -xs)
    assert np.all(np.abs(y1 + y2) <= e1 + e2 + 1e-15)


def test_conjugacy_is_increasing(cross):
    xs = np.linspace(-1, 1, 401)
    ys, errs = eval_conjugacy_many(cross, xs)
    # increments exceed the combined error bounds wherever they are resolved
    inc = np.diff(ys)
    resolved = np.abs(inc) > errs[1:] + errs[:-1]
    assert np.all(inc[resolved] > 0)


def test_scaffold_points_map_to_scaffold_points(cross):
    g_sc, f_sc = cross.g.scaffold, cross.f.scaffold
    for n in range(DEPTH + 1):
        for s in (1.0, -1.0):
            assert eval_conjugacy(cross, s * g_sc.p[n]) == (s * f_sc.p[n], 0.0)
    for j in (1, 2, 5, 16):
        assert eval_conjugacy(cross, float(g_sc.c[j])) == (float(f_sc.c[j]), 0.0)


def test_conjugacy_increases_on_partition_endpoints(cross):
    ys, _ = eval_conjugacy_many(cross, cross.g.endpoints())
    assert np.all(np.diff(ys) > 0)


def test_conjugacy_equation_holds_within_bound(cross):
    xs = np.random.default_rng(3).uniform(-1, 1, 200)
    lhs, bound = conjugacy_defects(cross, xs)
    assert np.all(lhs <= bound)


def test_itinerary_tags(affine_partition):
    it = itinerary(affine_partition, 0.0, 8)
    assert it.tag == "residual" and it.word == ()
    it = itinerary(affine_partition, affine_partition.scaffold.p[3], 8)
    assert it.tag == "boundary" and it.endpoint == affine_partition.scaffold.p[3]
    it = itinerary(affine_partition, 0.9, 4)
    assert it.tag == "complete" and len(it.word) == 4
    assert it.word[0] == BranchId(0, Side.POS)


def test_itinerary_is_admissible(affine_partition):
    table = successor_table(affine_partition)
    for x in np.linspace(-0.99, 0.99, 23):
        word = itinerary(affine_partition, float(x), 6).word
        assert all(b in table[a] for a, b in zip(word, word[1:]))


def test_mismatched_depths_rejected(affine_scaffold):
    with pytest.raises(CombinatorialMismatch):
        ConjugacyContext(build_partition(affine_scaffold, 4), build_partition(affine_scaffold, 5))


def test_domain_checks(cross):
    with pytest.raises(InvalidParameter):
        eval_conjugacy(cross, 1.5)
    with pytest.raises(InvalidParameter):
        qs_grid(0.6)
    with pytest.raises(InvalidParameter):
        build_context(cross.f.scaffold.spec, cross.g.scaffold.spec, 40)


def test_self_qs_ratio_is_one(self_ctx):
    rep = qs_report(self_ctx, [2.0**-8], grid_n=64, word_caps=(16,))
    assert rep.M_hat == pytest.approx(1.0, abs=1e-6)


def test_strict_report_raises_when_unresolved(cross):
    with pytest.raises(DepthInsufficient):
        qs_report(cross, [2.0**-12], grid_n=32, word_caps=(4,), strict=True)


def test_report_serialisation(self_ctx):
    rep = qs_report(self_ctx, [2.0**-6], grid_n=16, word_caps=(8,))
    lines = rep.to_csv().splitlines()
    assert lines[0] == "d,max_ratio,samples,max_err_bound,reliable_flag"
    assert lines[1].startswith("0.015625,")
    assert '"M_hat"' in rep.to_json()
