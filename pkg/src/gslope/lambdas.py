"""Regularization sequences built from chi quantiles.

Three generators are provided:

* :func:`lambda_max` -- per rank the worst case over groups; gives provable
  group FDR control for designs orthogonal at the group level.
* :func:`lambda_mean` -- quantiles of the equal-weight mixture of scaled chi
  distributions; less conservative with mixed group ranks.
* :func:`lambda_corrected` -- the mixture sequence inflated step by step for
  independent Gaussian regressors, flattened once it stops decreasing.

``weights`` and ``ranks`` describe the groups entering the chi mixtures; ``m``
is the length of the sequence and the denominator of the levels
``1 - q i / m``.  Usually ``m`` equals the number of groups, but a larger
``m`` is allowed (for example after screening, when the multiplicity
correction should count every candidate).
"""

from __future__ import annotations

from collections import Counter
from functools import lru_cache

import numpy as np

from .sorted_l1 import LambdaSequence
from .special import P_MAX, P_MIN, ChiMixture, chi_quantile


def _check_inputs(q, weights, ranks, m):
    if not 0.0 < q < 1.0:
        raise ValueError(f"q must lie in (0, 1), got {q}")
    weights = tuple(float(w) for w in np.ravel(weights))
    ranks = tuple(int(l) for l in np.ravel(ranks))
    if len(weights) != len(ranks) or not weights:
        raise ValueError("weights and ranks must be nonempty and of equal length")
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m}")
    if any(not w > 0 for w in weights):
        raise ValueError("weights must be positive")
    if any(l < 1 for l in ranks):
        raise ValueError("ranks must be positive integers")
    return float(q), weights, ranks, int(m)


def _level(q, i, m):
    return min(max(1.0 - q * i / m, P_MIN), P_MAX)


def _meta(q, weights, ranks, m, **extra):
    pairs = Counter(zip(ranks, weights))
    return dict(
        q=q,
        m=m,
        components=[{"rank": l, "weight": w, "count": c} for (l, w), c in sorted(pairs.items())],
        **extra,
    )


@lru_cache(maxsize=64)
def _lambda_max(q, weights, ranks, m):
    pairs = sorted(set(zip(ranks, weights)))
    return tuple(max(chi_quantile(l, _level(q, i, m)) / w for l, w in pairs) for i in range(1, m + 1))


def lambda_max(q: float, weights, ranks, m: int) -> LambdaSequence:
    """``lambda_i = max_j F^{-1}_{chi_{l_j}}(1 - q i / m) / w_j``."""
    q, weights, ranks, m = _check_inputs(q, weights, ranks, m)
    vals = _lambda_max(q, weights, ranks, m)
    return LambdaSequence(np.array(vals), "max", _meta(q, weights, ranks, m))


@lru_cache(maxsize=64)
def _lambda_mean(q, weights, ranks, m):
    mix = ChiMixture(ranks, tuple(1.0 / w for w in weights))
    return tuple(mix.quantile(_level(q, r, m)) for r in range(1, m + 1))


def lambda_mean(q: float, weights, ranks, m: int) -> LambdaSequence:
    """Quantiles ``Fbar^{-1}(1 - q r / m)`` of the mixture of ``w_i^{-1} chi_{l_i}``."""
    q, weights, ranks, m = _check_inputs(q, weights, ranks, m)
    vals = _lambda_mean(q, weights, ranks, m)
    return LambdaSequence(np.array(vals), "mean", _meta(q, weights, ranks, m))


@lru_cache(maxsize=64)
def _lambda_corrected(q, weights, ranks, m, n):
    w = np.array(weights)
    l = np.array(ranks, dtype=float)
    inv_w = tuple(1.0 / wi for wi in weights)
    lam = [ChiMixture(ranks, inv_w).quantile(_level(q, 1, m))]
    flat_from = None
    sum_sq = lam[0] ** 2
    for i in range(2, m + 1):
        resid_dof = n - l * (i - 1)
        if np.any(resid_dof - 1.0 <= 0.0):
            flat_from = i
            break
        S = np.sqrt(resid_dof / n + w * w * sum_sq / (resid_dof - 1.0))
        cand = ChiMixture(ranks, tuple(S / w)).quantile(_level(q, i, m))
        if cand > lam[-1]:
            flat_from = i
            break
        lam.append(cand)
        sum_sq += cand * cand
    if flat_from is not None:
        lam.extend([lam[-1]] * (m - len(lam)))
    return tuple(lam), flat_from


def lambda_corrected(q: float, weights, ranks, m: int, n: int) -> LambdaSequence:
    """Mixture sequence corrected for independent Gaussian regressors.

    Starting from the first mixture quantile, entry ``i`` is the
    ``1 - q i / m`` quantile of the mixture of ``S_j / w_j * chi_{l_j}``
    where

        S_j = sqrt((n - l_j (i-1)) / n + w_j^2 ||lambda_{1:i-1}||^2 / (n - l_j (i-1) - 1)).

    As soon as a candidate exceeds its predecessor, or some denominator
    ``n - l_j (i-1) - 1`` is no longer positive, the remaining entries are
    set to the last accepted value.
    """
    q, weights, ranks, m = _check_inputs(q, weights, ranks, m)
    if int(n) != n or n < 2:
        raise ValueError(f"sample size must be an integer >= 2, got {n}")
    vals, flat_from = _lambda_corrected(q, weights, ranks, m, int(n))
    meta = _meta(q, weights, ranks, m, n=int(n), flat_from=flat_from)
    return LambdaSequence(np.array(vals), "corrected", meta)


def make_lambda(kind: str, q: float, weights, ranks, m: int | None = None, n: int | None = None) -> LambdaSequence:
    """Dispatch on ``kind`` in ``{"max", "mean", "corrected"}``."""
    m = len(np.ravel(weights)) if m is None else m
    if kind == "max":
        return lambda_max(q, weights, ranks, m)
    if kind == "mean":
        return lambda_mean(q, weights, ranks, m)
    if kind == "corrected":
        if n is None:
            raise ValueError("the corrected sequence needs the sample size n")
        return lambda_corrected(q, weights, ranks, m, n)
    raise ValueError(f"unknown lambda kind {kind!r}")


def weights_from_rule(rule: str, sizes, ranks=None) -> np.ndarray:
    """Group weights by name: ``sqrt_size``, ``sqrt_rank``, ``size`` or ``one``."""
    sizes = np.asarray(sizes, dtype=float)
    if rule == "sqrt_size":
        return np.sqrt(sizes)
    if rule == "sqrt_rank":
        if ranks is None:
            raise ValueError("sqrt_rank weights need group ranks")
        return np.sqrt(np.asarray(ranks, dtype=float))
    if rule == "size":
        return sizes.copy()
    if rule == "one":
        return np.ones_like(sizes)
    raise ValueError(f"unknown weight rule {rule!r}")


__all__ = [
    "lambda_max",
    "lambda_mean",
    "lambda_corrected",
    "make_lambda",
    "weights_from_rule",
]
