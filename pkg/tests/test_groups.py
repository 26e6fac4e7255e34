import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra import numpy as hnp

from gslope.groups import (
    GroupPartition,
    block_norms,
    build_grouped_design,
    factorize_block,
    group_effects,
    grouped_dual_norm,
    grouped_norm,
    prox_grouped,
)
from gslope.sorted_l1 import prox_sorted_l1, sorted_l1_norm


def random_design(rng, n=30, sizes=(3, 1, 4, 2)):
    X = rng.standard_normal((n, sum(sizes)))
    return build_grouped_design(X, GroupPartition.from_sizes(sizes, np.sqrt(sizes)))


def test_partition_validation():
    part = GroupPartition([[2, 0], [1]])
    assert part.m == 2 and part.p == 3
    assert part.groups[0].tolist() == [0, 2]
    assert part.weights.tolist() == [1.0, 1.0]
    for bad in ([[0, 1], [1, 2]], [[0], [2]], [[]], []):
        with pytest.raises(ValueError):
            GroupPartition(bad)
    with pytest.raises(ValueError):
        GroupPartition([[0], [1]], weights=[1.0, 0.0])
    with pytest.raises(ValueError):
        GroupPartition([[0], [1]], weights=[1.0])


def test_partition_constructors():
    a = GroupPartition.from_labels([5, 2, 5, 2, 9])
    assert [g.tolist() for g in a.groups] == [[1, 3], [0, 2], [4]]
    b = GroupPartition.from_sizes([2, 3])
    assert [g.tolist() for g in b.groups] == [[0, 1], [2, 3, 4]]
    assert b.sizes.tolist() == [2, 3]
    assert b.with_weights([2.0, 3.0]).weights.tolist() == [2.0, 3.0]


def test_factorize_full_rank(rng):
    block = rng.standard_normal((10, 3))
    U, R, Rp = factorize_block(block)
    assert U.shape == (10, 3)
    assert np.allclose(U @ R, block, atol=1e-12)
    assert np.allclose(U.T @ U, np.eye(3), atol=1e-12)
    assert np.allclose(R @ Rp, np.eye(3), atol=1e-12)


def test_factorize_rank_deficient(rng):
    a = rng.standard_normal((10, 2))
    block = np.column_stack([a, a[:, 0] - 2 * a[:, 1]])
    U, R, _ = factorize_block(block)
    assert U.shape[1] == 2
    assert np.allclose(U @ R, block, atol=1e-12)
    with pytest.raises(ValueError):
        factorize_block(np.zeros((4, 2)))


def test_build_rejects_bad_inputs(rng):
    with pytest.raises(ValueError):
        build_grouped_design(rng.standard_normal((5, 3)), GroupPartition.from_sizes([2, 2]))
    X = rng.standard_normal((5, 3))
    X[:, 2] = 0.0
    with pytest.raises(ValueError, match="group 1"):
        build_grouped_design(X, GroupPartition.from_sizes([2, 1]))


def test_design_does_not_freeze_caller_array(rng):
    X = rng.standard_normal((6, 4))
    d = build_grouped_design(X, GroupPartition.from_sizes([2, 2]))
    X[0, 0] = 1.0
    assert X.flags.writeable and not d.X.flags.writeable


def test_ranks_follow_factorization(rng):
    X = rng.standard_normal((8, 4))
    X[:, 1] = 3 * X[:, 0]
    d = build_grouped_design(X, GroupPartition.from_sizes([2, 2]))
    assert d.ranks.tolist() == [1, 2]
    assert d.Xtilde.shape == (8, 3)


def test_effects_via_R_match_raw_design(rng):
    d = random_design(rng)
    b = rng.standard_normal(d.p)
    assert np.allclose(group_effects(d, b), group_effects(d, b, via="X"), rtol=1e-12)
    # identity design: effects are block norms of b
    e = build_grouped_design(np.eye(5), GroupPartition.from_sizes([2, 3]))
    b = np.array([3.0, 4.0, 1.0, 2.0, 2.0])
    assert np.allclose(group_effects(e, b), [5.0, 3.0])


def test_standardized_round_trip(rng):
    d = random_design(rng)
    c = rng.standard_normal(d.Xtilde.shape[1])
    b = d.from_standardized(c)
    assert np.allclose(d.to_standardized(b), c, atol=1e-12)
    assert np.allclose(d.X @ b, d.Xtilde @ c, atol=1e-12)


def test_orthogonality_defect(rng):
    Q, _ = np.linalg.qr(rng.standard_normal((12, 6)))
    d = build_grouped_design(Q @ np.diag([1, 2, 3, 1, 1, 5]), GroupPartition.from_sizes([2, 4]))
    assert d.group_orthogonality_defect < 1e-12
    assert random_design(rng).group_orthogonality_defect > 1e-3


def test_grouped_norm(rng):
    d = random_design(rng)
    b = rng.standard_normal(d.p)
    lam = np.array([4.0, 3.0, 2.0, 1.0])
    assert grouped_norm(lam, d, b) == pytest.approx(sorted_l1_norm(lam, d.weights * group_effects(d, b, via="X")))
    with pytest.raises(ValueError):
        grouped_norm(lam[:3], d, b)


@st.composite
def grouped_problem(draw):
    sizes = draw(st.lists(st.integers(1, 4), min_size=1, max_size=5))
    lam = np.sort(draw(hnp.arrays(float, len(sizes), elements=st.floats(0, 5))))[::-1]
    y = draw(hnp.arrays(float, sum(sizes), elements=st.floats(-10, 10)))
    return sizes, lam, y


@given(grouped_problem())
def test_prox_grouped_structure(problem):
    sizes, lam, y = problem
    x = prox_grouped(lam, sizes, y)
    norms_y = block_norms(y, sizes)
    norms_x = block_norms(x, sizes)
    assert np.allclose(norms_x, prox_sorted_l1(lam, norms_y), atol=1e-10)
    # each nonzero block is a nonnegative multiple of the input block
    starts = np.concatenate([[0], np.cumsum(sizes)[:-1]])
    for s, l, nx, ny in zip(starts, sizes, norms_x, norms_y):
        blk_x, blk_y = x[s : s + l], y[s : s + l]
        if nx > 0:
            assert np.allclose(blk_x * ny, blk_y * nx, atol=1e-9)
        else:
            assert np.all(blk_x == 0)


@given(grouped_problem())
def test_prox_grouped_optimality(problem):
    sizes, lam, y = problem
    if lam[0] == 0:
        return
    x = prox_grouped(lam, sizes, y)
    g = y - x
    nx = block_norms(x, sizes)
    gap = abs(float(x @ g) - sorted_l1_norm(lam, nx))
    assert gap <= 1e-8 * (1 + np.abs(y).sum() * lam[0])
    slack = 1e-15 * np.abs(y).sum() / lam[0]
    assert grouped_dual_norm(lam, sizes, g) <= 1 + 1e-8 + slack


def test_prox_grouped_zero_block():
    assert np.array_equal(prox_grouped([1.0, 0.5], [2, 1], [0.0, 0.0, 3.0]), [0.0, 0.0, 2.0])
    with pytest.raises(ValueError):
        prox_grouped([1.0], [2], [1.0, 2.0, 3.0])


def test_grouped_dual_norm_weights():
    x = np.array([3.0, 4.0, 1.0])
    assert grouped_dual_norm([5.0, 1.0], [2, 1], x) == pytest.approx(1.0)
    assert grouped_dual_norm([5.0, 1.0], [2, 1], x, weights=[5.0, 1.0]) == pytest.approx(2.0 / 6.0)
