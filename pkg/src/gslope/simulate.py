"""Monte Carlo estimation of group FDR and power.

Replication ``r`` of an experiment with seed ``s`` draws from a Philox
(counter-based) stream keyed by ``(s, 1, r)``; the group layout is drawn
once from the stream ``(s, 0)``.  Per-replication outcomes are reduced with
``math.fsum``, so reports do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .groups import GroupPartition, build_grouped_design, group_effects
from .lambdas import make_lambda, weights_from_rule
from .sigma import solve_with_sigma_estimation
from .solver import SolveOptions, solve_gslope, solve_orthogonal
from .special import ConvergenceError

DESIGNS = ("identity", "orthogonal", "gaussian")


def stream(seed: int, *key: int) -> np.random.Generator:
    """Independent Philox generator for the substream ``key`` of ``seed``."""
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def signal_strength(m: int, l: int) -> float:
    """``B(m, l) = sqrt(4 ln m / (1 - m^(-2/l)) - l)``.

    The first term bounds the expected maximum of ``m`` independent
    chi-square(``l``) variables; ``B`` is the group effect whose noisy norm
    sits at that level.
    """
    if m < 2:
        raise ValueError("need m >= 2")
    val = max_chi_sq_bound(m, l) - l
    if not val > 0:
        raise ValueError(f"B({m}, {l}) undefined: expression under the root is {val}")
    return math.sqrt(val)


def max_chi_sq_bound(m: int, l: int) -> float:
    """Upper bound ``4 ln m / (1 - m^(-2/l))`` on E[max of m iid chi-square(l)]."""
    if m < 2:
        raise ValueError("need m >= 2")
    if l < 1:
        raise ValueError("need l >= 1")
    denom = -math.expm1(-2.0 * math.log(m) / l)
    if denom <= 0.0:
        return math.inf
    return 4.0 * math.log(m) / denom


def max_chi_sq_monte_carlo(m: int, l: int, reps: int, rng: np.random.Generator):
    """Sample mean and standard error of ``max`` of ``m`` iid chi-square(``l``)."""
    maxima = rng.chisquare(l, size=(reps, m)).max(axis=1)
    return float(maxima.mean()), float(maxima.std(ddof=1) / math.sqrt(reps))


@dataclass
class SimConfig:
    """One cell of a simulation study.

    ``group_size_spec`` is an int (all groups that size), a list of ``m``
    sizes, ``{"repeat": [3, 4, 5]}`` (equal numbers of each size, in blocks)
    or ``{"binomial": [n_trials, prob]}`` (``1 + Binomial`` sizes drawn once
    per seed).
    """

    m: int
    n: int
    group_size_spec: object = 5
    design: str = "identity"
    q: float = 0.1
    k: int = 0
    weights_rule: str = "sqrt_rank"
    lambda_kind: str = "max"
    replications: int = 100
    seed: int = 0
    sigma: float = 1.0
    estimate_sigma: bool | None = None
    threads: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not 0.0 < self.q < 1.0:
            raise ValueError("q must lie in (0, 1)")
        if not 0 <= self.k <= self.m:
            raise ValueError("k must lie in [0, m]")
        if self.design not in DESIGNS:
            raise ValueError(f"design must be one of {DESIGNS}")
        if self.estimate_sigma is None:
            self.estimate_sigma = self.design == "gaussian"

    def group_sizes(self) -> np.ndarray:
        spec = self.group_size_spec
        if isinstance(spec, (int, np.integer)):
            sizes = np.full(self.m, int(spec))
        elif isinstance(spec, dict) and "repeat" in spec:
            vals = list(spec["repeat"])
            if self.m % len(vals):
                raise ValueError("m must be a multiple of the number of repeated sizes")
            sizes = np.repeat(vals, self.m // len(vals))
        elif isinstance(spec, dict) and "binomial" in spec:
            n_trials, prob = spec["binomial"]
            sizes = 1 + stream(self.seed, 0).binomial(int(n_trials), float(prob), size=self.m)
        else:
            sizes = np.asarray(spec, dtype=int)
            if sizes.shape != (self.m,):
                raise ValueError("explicit group sizes must have length m")
        if np.any(sizes < 1):
            raise ValueError("group sizes must be positive")
        return sizes.astype(int)


@dataclass
class SimulationReport:
    gfdr_hat: float
    power_hat: float
    se_gfdr: float
    se_power: float
    nominal_bound: float
    replications: int
    failures: int
    mean_discoveries: float
    config: dict = field(default_factory=dict)

    def as_row(self) -> dict:
        row = {k: v for k, v in asdict(self).items() if k != "config"}
        row = {"q": self.config["q"], "k": self.config["k"], **row}
        return row


def gen_design(config: SimConfig, rng: np.random.Generator | None = None, sizes=None):
    """Design matrix and grouped factorization for a configuration.

    ``identity``: ``X = I`` (padded with zero rows when ``n > p``);
    ``orthogonal``: ``Q`` from the QR factorization of a Gaussian matrix;
    ``gaussian``: iid ``N(0, 1/n)`` entries, columns centered and scaled to
    unit norm.
    """
    sizes = config.group_sizes() if sizes is None else sizes
    p = int(sizes.sum())
    n = config.n
    if config.design in ("identity", "orthogonal") and n < p:
        raise ValueError(f"{config.design} design needs n >= p (n={n}, p={p})")
    if config.design == "identity":
        X = np.eye(n, p)
    else:
        rng = rng if rng is not None else stream(config.seed, 2)
        G = rng.standard_normal((n, p)) / math.sqrt(n)
        if config.design == "orthogonal":
            X, _ = np.linalg.qr(G)
        else:
            X = G - G.mean(axis=0)
            X /= np.linalg.norm(X, axis=0)
    ranks = sizes
    weights = weights_from_rule(config.weights_rule, sizes, ranks)
    part = GroupPartition.from_sizes(sizes, weights)
    return build_grouped_design(X, part)


def gen_signal(design, k: int, rng: np.random.Generator) -> np.ndarray:
    """Plant ``k`` relevant groups chosen uniformly at random.

    Coefficients are iid ``U[0.1, 1.1]``, then each relevant block is
    rescaled so that its group effect equals ``a sqrt(l_i)`` with
    ``a = sum_i B(m, l_i) / sum_i sqrt(l_i)`` over all groups.
    """
    beta = np.zeros(design.p)
    if k == 0:
        return beta
    m = design.m
    ranks = design.ranks
    a = sum(signal_strength(m, int(l)) for l in ranks) / float(np.sum(np.sqrt(ranks)))
    chosen = np.sort(rng.choice(m, size=k, replace=False))
    for i in chosen:
        g = design.partition.groups[i]
        b = rng.uniform(0.1, 1.1, size=g.size)
        eff = np.linalg.norm(design.X[:, g] @ b)
        beta[g] = b * (a * math.sqrt(ranks[i]) / eff)
    return beta


def _one_replication(config, lam, sizes, fixed_design, rep):
    rng = stream(config.seed, 1, rep)
    design = fixed_design if fixed_design is not None else gen_design(config, rng, sizes)
    beta = gen_signal(design, config.k, rng)
    truth = group_effects(design, beta) > 0
    y = design.X @ beta + config.sigma * rng.standard_normal(design.n)
    opts = SolveOptions(sigma=config.sigma)
    try:
        if config.estimate_sigma:
            solver = solve_orthogonal if config.design != "gaussian" else solve_gslope
            res = solve_with_sigma_estimation(design, lam, y, opts, solver=solver).result
        elif config.design == "gaussian":
            res = solve_gslope(design, lam, y, opts)
        else:
            res = solve_orthogonal(design, lam, y, opts)
    except (ConvergenceError, ValueError):
        return None
    sel = np.zeros(design.m, dtype=bool)
    sel[res.selected] = True
    R = int(sel.sum())
    V = int(np.sum(sel & ~truth))
    T = int(np.sum(sel & truth))
    return V / max(R, 1), (T / config.k if config.k else math.nan), R, res.converged


def _mean_se(values):
    values = [v for v in values if not math.isnan(v)]
    if not values:
        return math.nan, math.nan
    r = len(values)
    mean = math.fsum(values) / r
    if r < 2:
        return mean, math.nan
    var = math.fsum((v - mean) ** 2 for v in values) / (r - 1)
    return mean, math.sqrt(var / r)


def lambda_for(config: SimConfig, sizes=None):
    sizes = config.group_sizes() if sizes is None else sizes
    weights = weights_from_rule(config.weights_rule, sizes, sizes)
    return make_lambda(config.lambda_kind, config.q, weights, sizes, config.m, config.n)


def run_experiment(config: SimConfig) -> SimulationReport:
    """Estimate group FDR and power for one configuration.

    The FDR estimate is the mean of per-replication ``V / max(R, 1)``;
    power is the mean of ``T / k`` (NaN when ``k = 0``).  Standard errors
    are sample standard deviations over ``sqrt(replications)``.
    Replications whose solver raised are counted in ``failures`` and left
    out of the averages; non-converged solves are counted but kept.
    """
    sizes = config.group_sizes()
    lam = lambda_for(config, sizes)
    fixed = gen_design(config, None, sizes) if config.design == "identity" else None

    def job(rep):
        return _one_replication(config, lam, sizes, fixed, rep)

    reps = range(config.replications)
    if config.threads > 1:
        with ThreadPoolExecutor(config.threads) as pool:
            out = list(pool.map(job, reps))
    else:
        out = [job(r) for r in reps]

    ok = [o for o in out if o is not None]
    failures = sum(1 for o in out if o is None or not o[3])
    gfdr, se_gfdr = _mean_se([o[0] for o in ok])
    power, se_power = _mean_se([o[1] for o in ok])
    mean_R = math.fsum(o[2] for o in ok) / len(ok) if ok else math.nan
    return SimulationReport(
        gfdr_hat=gfdr,
        power_hat=power,
        se_gfdr=se_gfdr,
        se_power=se_power,
        nominal_bound=config.q * (config.m - config.k) / config.m,
        replications=len(ok),
        failures=failures,
        mean_discoveries=mean_R,
        config=asdict(config),
    )
