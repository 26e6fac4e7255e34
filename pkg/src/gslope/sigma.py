"""Joint group selection and noise-level estimation.

Alternate between a least-squares fit on the currently selected columns
(giving ``sigma_hat^2 = RSS / (n - |S| - 1)``) and a group SLOPE solve with
penalty scaled by ``sigma_hat``, until the support stops changing.
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass

import numpy as np

from .groups import GroupedDesign
from .solver import SolveOptions, SolveResult, solve_gslope

log = logging.getLogger(__name__)


class SupportTooLarge(ValueError):
    """The selected support leaves no residual degrees of freedom."""


@dataclass
class SigmaEstimate:
    result: SolveResult
    sigma_hat: float
    trace: list
    converged: bool
    cycle: bool = False


def _rss(X, y, support):
    if support.size == 0:
        return float(y @ y)
    coef, *_ = np.linalg.lstsq(X[:, support], y, rcond=None)
    r = y - X[:, support] @ coef
    return float(r @ r)


def solve_with_sigma_estimation(
    design: GroupedDesign,
    lam,
    y,
    opts: SolveOptions | None = None,
    max_rounds: int = 100,
    solver=solve_gslope,
) -> SigmaEstimate:
    """Iterate noise estimation and group SLOPE to a fixed support.

    The empty support uses ``RSS = ||y||^2`` (the model has no intercept).
    The support ``S`` counts variables, i.e. columns of ``X`` with nonzero
    coefficients.  If a support reappears before a fixed point is reached,
    the iterate with the smallest ``sigma_hat`` among the repeating ones is
    returned with ``converged=False`` and ``cycle=True``.

    Raises
    ------
    SupportTooLarge
        If ``|S| >= n - 1``.
    """
    opts = opts or SolveOptions()
    y = np.asarray(y, dtype=float).ravel()
    n = design.n
    if n <= 1:
        raise ValueError("need at least two observations")
    X = design.X

    support = np.array([], dtype=int)
    seen = {}
    history = []
    trace = []
    eta = None
    for _ in range(max_rounds):
        df = n - support.size - 1
        if df <= 0:
            raise SupportTooLarge("support too large for sigma estimation")
        sigma_hat = np.sqrt(_rss(X, y, support) / df)
        if not sigma_hat > 0:
            raise SupportTooLarge("residual sum of squares is zero; cannot estimate sigma")
        kwargs = {"eta0": eta} if solver is solve_gslope else {}
        res = solver(design, lam, y, dataclasses.replace(opts, sigma=sigma_hat), **kwargs)
        if solver is solve_gslope:
            eta = _eta_of(design, res)
        new_support = np.flatnonzero(_variable_mask(design, res))
        key = tuple(support.tolist())
        seen[key] = len(history)
        history.append((res, sigma_hat))
        trace.append(support.tolist())
        if np.array_equal(new_support, support):
            return SigmaEstimate(res, float(sigma_hat), trace, True)
        new_key = tuple(new_support.tolist())
        if new_key in seen:
            cyc = history[seen[new_key]:]
            best_res, best_sigma = min(cyc, key=lambda rs: rs[1])
            log.warning("sigma estimation entered a cycle of length %d", len(cyc))
            return SigmaEstimate(best_res, float(best_sigma), trace, False, cycle=True)
        support = new_support
    log.warning("sigma estimation hit the round cap (%d)", max_rounds)
    res, sigma_hat = history[-1]
    return SigmaEstimate(res, float(sigma_hat), trace, False)


def _variable_mask(design, res):
    # Columns of selected groups; within a selected group the minimum-norm
    # preimage is generically dense, but exact zeros are respected.
    mask = np.zeros(design.p, dtype=bool)
    for i in res.selected:
        g = design.partition.groups[i]
        mask[g] = res.beta[g] != 0.0
    return mask


def _eta_of(design, res):
    c = design.to_standardized(res.beta)
    return c * np.repeat(design.weights, design.ranks)
