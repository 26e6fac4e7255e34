import numpy as np
import pytest

from gslope.groups import GroupPartition, build_grouped_design
from gslope.lambdas import lambda_corrected
from gslope.sigma import SupportTooLarge, solve_with_sigma_estimation
from gslope.simulate import SimConfig, gen_design, stream
from gslope.solver import SolveOptions, SolveResult, solve_gslope


def gaussian_design(m=100, n=500, l=3, seed=0):
    cfg = SimConfig(m=m, n=n, group_size_spec=l, design="gaussian", seed=seed)
    design = gen_design(cfg, stream(seed, 9))
    lam = lambda_corrected(0.1, design.weights, design.ranks, m, n)
    return design, lam


def test_pure_noise_sigma_recovered_in_median():
    design, lam = gaussian_design()
    sigma = 2.0
    est = []
    for rep in range(100):
        y = sigma * stream(1, rep).standard_normal(design.n)
        out = solve_with_sigma_estimation(design, lam, y)
        assert out.sigma_hat > 0
        est.append(out.sigma_hat)
    assert abs(np.median(est) / sigma - 1) < 0.10


def test_strong_group_selected_quickly():
    design, lam = gaussian_design(m=40, n=200)
    rng = stream(2, 0)
    g = design.partition.groups[7]
    beta = np.zeros(design.p)
    beta[g] = 50.0
    y = design.X @ beta + rng.standard_normal(design.n)
    out = solve_with_sigma_estimation(design, lam, y)
    assert out.converged and not out.cycle
    assert 7 in out.result.selected.tolist()
    assert len(out.trace) <= 3
    assert out.sigma_hat == pytest.approx(1.0, rel=0.25)


def test_empty_fixed_point():
    design, lam = gaussian_design(m=20, n=100)
    y = 1e-3 * stream(3, 0).standard_normal(design.n)
    out = solve_with_sigma_estimation(design, lam, y)
    assert out.converged
    assert out.trace == [[]]
    assert out.result.selected.size == 0
    assert out.sigma_hat == pytest.approx(np.sqrt(y @ y / (design.n - 1)))


def test_trace_supports_are_distinct_and_sigma_positive():
    design, lam = gaussian_design(m=40, n=200, seed=4)
    rng = stream(4, 1)
    beta = np.zeros(design.p)
    for i in (0, 5, 9, 20):
        beta[design.partition.groups[i]] = rng.uniform(0.5, 1.5, design.partition.groups[i].size)
    y = design.X @ beta * 4 + rng.standard_normal(design.n)
    out = solve_with_sigma_estimation(design, lam, y)
    keys = [tuple(s) for s in out.trace]
    assert len(set(keys)) == len(keys) or out.cycle
    assert out.sigma_hat > 0


def fake_solver_factory(design, supports):
    calls = {"n": 0}

    def solver(design_, lam, y, opts, **kw):
        sel = supports[calls["n"] % len(supports)]
        calls["n"] += 1
        beta = np.zeros(design.p)
        for i in sel:
            beta[design.partition.groups[i]] = 1.0
        effects = np.zeros(design.m)
        effects[list(sel)] = 1.0
        return SolveResult(beta, effects, np.array(sel, dtype=int), 1, 0.0, 0.0, 0.0, True, opts.sigma)

    return solver


def test_cycle_returns_smallest_sigma_flagged():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((30, 6))
    design = build_grouped_design(X, GroupPartition.from_sizes([2, 2, 2]))
    y = X[:, 0] * 5 + X[:, 2] + 0.1 * rng.standard_normal(30)
    # selected groups: none -> 0 -> 1 -> 0 ...
    solver = fake_solver_factory(design, [[0], [1]])
    out = solve_with_sigma_estimation(design, [1.0, 1.0, 1.0], y, solver=solver)
    assert out.cycle and not out.converged
    assert out.trace == [[], [0, 1], [2, 3]]
    # the cycle visits columns {0,1} and {2,3}; the first fits y better, so its
    # sigma_hat is kept together with the solve run at that sigma_hat
    coef, *_ = np.linalg.lstsq(X[:, :2], y, rcond=None)
    r = y - X[:, :2] @ coef
    assert out.sigma_hat == pytest.approx(np.sqrt(r @ r / (30 - 2 - 1)))
    assert out.result.selected.tolist() == [1]


def test_support_too_large():
    rng = np.random.default_rng(1)
    X = rng.standard_normal((6, 6))
    design = build_grouped_design(X, GroupPartition.from_sizes([3, 3]))
    solver = fake_solver_factory(design, [[0, 1]])
    with pytest.raises(SupportTooLarge):
        solve_with_sigma_estimation(design, [1.0, 1.0], rng.standard_normal(6), solver=solver)


def test_requires_two_observations():
    design = build_grouped_design(np.ones((1, 1)), GroupPartition.from_sizes([1]))
    with pytest.raises(ValueError):
        solve_with_sigma_estimation(design, [1.0], [1.0])


def test_sigma_estimate_matches_fixed_sigma_solve():
    design, lam = gaussian_design(m=30, n=150, seed=5)
    rng = stream(5, 0)
    beta = np.zeros(design.p)
    beta[design.partition.groups[3]] = 3.0
    y = design.X @ beta + rng.standard_normal(design.n)
    out = solve_with_sigma_estimation(design, lam, y)
    ref = solve_gslope(design, lam, y, SolveOptions(sigma=out.sigma_hat))
    assert ref.selected.tolist() == out.result.selected.tolist()
