import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from renormlab.errors import BoundaryPoint, InvalidParameter, OutOfImage, ResidualPoint
from renormlab.markov import (
    BranchId,
    Side,
    apply_F,
    build_partition,
    enumerate_words,
    invert_branch,
    is_level_monotone,
    koebe_space,
    markov_defects,
    successor_table,
    word_cylinder_and_distortion,
    word_distortions,
    words_to_csv,
)


def bid(text):
    return BranchId.parse(text)


def test_branch_labels_roundtrip():
    for text in ("0", "-0", "3", "-7"):
        assert str(BranchId.parse(text)) == text
    assert BranchId.parse("-2") == BranchId(2, Side.NEG)


def test_partition_tiles_the_interval(affine_partition):
    part = affine_partition
    doms = sorted((b.domain for b in part.branches), key=lambda d: d.lo)
    pieces = [(d.lo, d.hi) for d in doms] + [(part.residual.lo, part.residual.hi)]
    pieces.sort()
    assert pieces[0][0] == -1.0 and pieces[-1][1] == 1.0
    assert all(a[1] == b[0] for a, b in zip(pieces, pieces[1:]))


def test_markov_images_land_on_partition_points(affine_partition, moebius_partition):
    for part in (affine_partition, moebius_partition):
        assert max(markov_defects(part).values()) < 1e-14


def test_level_n_branch_maps_onto_T_next(affine_partition):
    sc = affine_partition.scaffold
    for b in affine_partition.branches:
        n = b.id.level
        T = sc.T(n + 1)
        assert b.image.lo == pytest.approx(T.lo, abs=1e-14)
        assert b.image.hi == pytest.approx(T.hi, abs=1e-14)


def test_successors_are_same_level_inner_side_and_all_deeper(affine_partition):
    table = successor_table(affine_partition)
    sc = affine_partition.scaffold
    for b, succ in table.items():
        p_side = Side.POS if sc.p[b.level] > 0 else Side.NEG
        want = {BranchId(b.level, p_side)} | {BranchId(m, s) for m in range(b.level + 1, 7) for s in Side}
        assert set(succ) == want


def test_successor_tables_agree_across_families(affine_partition, moebius_partition):
    assert successor_table(affine_partition) == successor_table(moebius_partition)


def test_locate_classifies_points(affine_partition):
    part = affine_partition
    assert part.locate(-0.9) == BranchId(0, Side.NEG)
    assert part.locate(0.9) == BranchId(0, Side.POS)
    with pytest.raises(ResidualPoint):
        part.locate(0.0)
    with pytest.raises(BoundaryPoint):
        part.locate(part.scaffold.p[2])
    with pytest.raises(InvalidParameter):
        part.locate(1.5)


def test_partition_requires_deeper_scaffold(affine_scaffold):
    with pytest.raises(InvalidParameter):
        build_partition(affine_scaffold, 10)


@given(st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_inverse_branch_roundtrip(affine_partition, s):
    for b in affine_partition.branches:
        y = b.image.lo + s * b.image.length
        x = invert_branch(affine_partition, b, y)
        assert b.domain.contains(x, tol=1e-15)
        fx, where = apply_F(affine_partition, x) if not _near_edge(affine_partition, x) else (y, b.id)
        assert where == b.id
        assert fx == pytest.approx(y, abs=1e-12)


def _near_edge(part, x):
    return np.min(np.abs(np.abs(x) - part.radii)) <= 1e-12


def test_invert_outside_image_raises(affine_partition):
    b = affine_partition.branch(bid("0"))
    with pytest.raises(OutOfImage):
        invert_branch(affine_partition, b, b.image.hi + 0.1)


def test_word_counts_follow_the_successor_rule(affine_partition):
    # a level-n symbol has 2 (6 - n) + 1 successors when the cap is 6
    counts = [len(enumerate_words(affine_partition, k, 6)) for k in range(1, 6)]
    assert counts == [14, 98, 462, 1666, 4942]


def test_words_are_level_monotone(affine_partition):
    assert all(is_level_monotone(w) for w in enumerate_words(affine_partition, 4, 6))
    assert not is_level_monotone((bid("3"), bid("1")))


def test_batched_distortion_matches_single_word(affine_partition):
    layers = word_distortions(affine_partition, 3, 4)
    for cyl in layers[3][::37]:
        single = word_cylinder_and_distortion(affine_partition, cyl.word)
        assert single.cylinder.lo == pytest.approx(cyl.cylinder.lo, abs=1e-14)
        assert single.derivative_ratio == pytest.approx(cyl.derivative_ratio, rel=1e-12)
        assert single.sup_N_times_D == pytest.approx(cyl.sup_N_times_D, rel=1e-12)


def test_cylinder_maps_onto_its_image(affine_partition):
    word = (bid("-1"), bid("2"), bid("3"))
    cyl = word_cylinder_and_distortion(affine_partition, word)
    first = affine_partition.branch(word[0])
    assert first.domain.contains_interval(cyl.cylinder)
    f = affine_partition.scaffold.spec
    total = sum(2**b.level for b in word)
    ends = sorted(f.iterate_precise(np.array([cyl.cylinder.lo, cyl.cylinder.hi]), total))
    img = affine_partition.branch(word[-1]).image
    assert ends[0] == pytest.approx(img.lo, abs=1e-10) and ends[1] == pytest.approx(img.hi, abs=1e-10)


def test_inadmissible_word_rejected(affine_partition):
    with pytest.raises(InvalidParameter):
        word_cylinder_and_distortion(affine_partition, (bid("3"), bid("1")))


def test_koebe_space_is_uniform(affine_partition, moebius_partition):
    for part in (affine_partition, moebius_partition):
        spaces = [koebe_space(part, b) for b in part.branches]
        assert min(spaces) > 0.2


def test_words_csv_header(affine_partition):
    text = words_to_csv(word_distortions(affine_partition, 1, 1)[1])
    assert text.splitlines()[0] == "word,|D(g_w)|,sup_N_times_D,derivative_ratio,sup_dlog_times_D"
    assert len(text.splitlines()) == 5
