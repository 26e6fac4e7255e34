"""Scalar special functions: incomplete gamma, chi and scaled-chi mixtures,
and the F survival function used by the ANOVA screen.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

from scipy import special as _sp

_EPS = 1e-16
_TINY = 1e-300
_MAX_TERMS = 10_000

# Probabilities are clamped into [P_MIN, P_MAX] before inversion.
P_MIN = 1e-15
P_MAX = 1.0 - 1e-15


class ConvergenceError(ArithmeticError):
    """An iterative numerical routine hit its iteration cap."""


def _gamma_series(a, x):
    # P(a, x) by the power series; good for x < a + 1.
    term = 1.0 / a
    total = term
    ap = a
    for _ in range(_MAX_TERMS):
        ap += 1.0
        term *= x / ap
        total += term
        if abs(term) < abs(total) * _EPS:
            break
    else:
        raise ConvergenceError("incomplete gamma series did not converge")
    return total * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _gamma_cf(a, x):
    # Q(a, x) by the Lentz continued fraction; good for x >= a + 1.
    b = x + 1.0 - a
    c = 1.0 / _TINY
    d = 1.0 / b
    h = d
    for i in range(1, _MAX_TERMS):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _TINY:
            d = _TINY
        c = b + an / c
        if abs(c) < _TINY:
            c = _TINY
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < _EPS:
            break
    else:
        raise ConvergenceError("incomplete gamma continued fraction did not converge")
    return h * math.exp(-x + a * math.log(x) - math.lgamma(a))


def _check_gamma_args(a, x):
    if not a > 0:
        raise ValueError(f"shape parameter must be positive, got {a}")
    if not x >= 0:
        raise ValueError(f"argument must be nonnegative, got {x}")


def reg_lower_gamma(a: float, x: float) -> float:
    """Regularized lower incomplete gamma function P(a, x)."""
    _check_gamma_args(a, x)
    if x == 0.0:
        return 0.0
    if math.isinf(x):
        return 1.0
    if x < a + 1.0:
        return min(1.0, _gamma_series(a, x))
    return max(0.0, 1.0 - _gamma_cf(a, x))


def reg_upper_gamma(a: float, x: float) -> float:
    """Regularized upper incomplete gamma function Q(a, x) = 1 - P(a, x).

    Computed directly in the upper tail so that small tail probabilities keep
    their relative accuracy.
    """
    _check_gamma_args(a, x)
    if x == 0.0:
        return 1.0
    if math.isinf(x):
        return 0.0
    if x < a + 1.0:
        return max(0.0, 1.0 - _gamma_series(a, x))
    return min(1.0, _gamma_cf(a, x))


def _check_dof(l):
    if int(l) != l or l < 1:
        raise ValueError(f"degrees of freedom must be a positive integer, got {l}")


def chi_cdf(l: int, x: float) -> float:
    """CDF of the chi distribution with ``l`` degrees of freedom."""
    _check_dof(l)
    if x <= 0:
        return 0.0
    return reg_lower_gamma(0.5 * l, 0.5 * x * x)


def chi_sf(l: int, x: float) -> float:
    """Survival function ``1 - chi_cdf(l, x)``, accurate in the upper tail."""
    _check_dof(l)
    if x <= 0:
        return 1.0
    return reg_upper_gamma(0.5 * l, 0.5 * x * x)


def chi_pdf(l: int, x: float) -> float:
    _check_dof(l)
    if x < 0:
        return 0.0
    if x == 0:
        return math.sqrt(2.0 / math.pi) if l == 1 else 0.0
    a = 0.5 * l
    return math.exp((l - 1) * math.log(x) - 0.5 * x * x - (a - 1.0) * math.log(2.0) - math.lgamma(a))


def _invert(cdf, sf, pdf, p, hi0):
    """Find x >= 0 with cdf(x) = p.

    Bisection down to a bracket of width 1e-6, then safeguarded Newton.
    Residuals are measured on whichever tail is smaller, so that quantiles
    close to 1 are located from the survival side.
    """
    if not 0.0 < p < 1.0:
        raise ValueError(f"probability must lie in (0, 1), got {p}")
    p = min(max(p, P_MIN), P_MAX)
    upper = p > 0.5
    target = 1.0 - p if upper else p

    def resid(x):
        # Increasing in x either way.
        return target - sf(x) if upper else cdf(x) - target

    lo, hi = 0.0, max(hi0, 1.0)
    n_iter = 0
    while resid(hi) < 0.0:
        lo, hi = hi, 2.0 * hi
        n_iter += 1
        if n_iter > 200:
            raise ConvergenceError("could not bracket quantile")
    while hi - lo > 1e-6:
        mid = 0.5 * (lo + hi)
        if resid(mid) < 0.0:
            lo = mid
        else:
            hi = mid
        n_iter += 1
        if n_iter > 200:
            raise ConvergenceError("quantile bisection exceeded iteration cap")

    x = 0.5 * (lo + hi)
    for _ in range(200 - n_iter):
        r = resid(x)
        if abs(r) <= 1e-15 * max(target, 1e-300) or r == 0.0:
            return x
        if r < 0.0:
            lo = x
        else:
            hi = x
        dens = pdf(x)
        step = r / dens if dens > 0 else math.inf
        x_new = x - step
        if not lo < x_new < hi:
            x_new = 0.5 * (lo + hi)
        if abs(x_new - x) <= 4e-16 * max(abs(x), 1.0):
            return x_new
        x = x_new
    if hi - lo <= 1e-12 * max(hi, 1.0):
        return x
    raise ConvergenceError("quantile Newton polish exceeded iteration cap")


def chi_quantile(l: int, p: float) -> float:
    """Quantile of the chi distribution with ``l`` degrees of freedom.

    ``p`` is clamped to ``[1e-15, 1 - 1e-15]`` so that the bracket stays
    finite when ``1 - p`` underflows.
    """
    _check_dof(l)
    return _invert(
        lambda x: chi_cdf(l, x),
        lambda x: chi_sf(l, x),
        lambda x: chi_pdf(l, x),
        p,
        math.sqrt(l) + 1.0,
    )


@dataclass(frozen=True)
class ChiMixture:
    """Equal-weight mixture of scaled chi distributions.

    Component ``j`` is ``scales[j] * chi_{dof[j]}``.  Repeated
    ``(dof, scale)`` pairs are collapsed internally, which keeps mixtures over
    thousands of groups cheap when only a handful of distinct components
    occur.
    """

    dof: tuple
    scales: tuple

    def __post_init__(self):
        dof = tuple(int(d) for d in self.dof)
        scales = tuple(float(s) for s in self.scales)
        if len(dof) == 0 or len(dof) != len(scales):
            raise ValueError("dof and scales must be nonempty and of equal length")
        for d in dof:
            _check_dof(d)
        if any(not s > 0 for s in scales):
            raise ValueError("all scales must be positive")
        object.__setattr__(self, "dof", dof)
        object.__setattr__(self, "scales", scales)
        counts = Counter(zip(dof, scales))
        total = len(dof)
        object.__setattr__(
            self, "_components", tuple((d, s, c / total) for (d, s), c in sorted(counts.items()))
        )

    def __len__(self):
        return len(self.dof)

    def cdf(self, x: float) -> float:
        if x <= 0:
            return 0.0
        return sum(wt * chi_cdf(d, x / s) for d, s, wt in self._components)

    def sf(self, x: float) -> float:
        if x <= 0:
            return 1.0
        return sum(wt * chi_sf(d, x / s) for d, s, wt in self._components)

    def pdf(self, x: float) -> float:
        return sum(wt * chi_pdf(d, x / s) / s for d, s, wt in self._components)

    def quantile(self, p: float) -> float:
        if not 0.0 < p < 1.0:
            raise ValueError(f"probability must lie in (0, 1), got {p}")
        # Each component quantile at p bounds the mixture quantile from one
        # side; pad toward 1 so the starting bracket already straddles it.
        p_pad = min(1.0 - 0.5 * (1.0 - p), P_MAX)
        hi = max(s * chi_quantile(d, p_pad) for d, s, _ in self._components)
        return _invert(self.cdf, self.sf, self.pdf, p, hi)


def mixture_cdf(mix: ChiMixture, x: float) -> float:
    """Average of the component CDFs ``chi_cdf(l_j, x / scale_j)``."""
    return mix.cdf(x)


def mixture_quantile(mix: ChiMixture, p: float) -> float:
    """Inverse of :func:`mixture_cdf`."""
    return mix.quantile(p)


def f_sf(d1: int, d2: int, x: float) -> float:
    """Upper-tail probability of the F(d1, d2) distribution.

    Uses ``P(F > x) = I_{d2 / (d2 + d1 x)}(d2 / 2, d1 / 2)``.
    """
    if int(d1) != d1 or int(d2) != d2 or d1 < 1 or d2 < 1:
        raise ValueError(f"F degrees of freedom must be positive integers, got ({d1}, {d2})")
    if x < 0:
        raise ValueError(f"F statistic must be nonnegative, got {x}")
    if x == 0:
        return 1.0
    if math.isinf(x):
        return 0.0
    return float(_sp.betainc(0.5 * d2, 0.5 * d1, d2 / (d2 + d1 * x)))
