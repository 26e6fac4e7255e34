"""Sorted L1 norm, its proximal operator and dual norm, and SLOPE with a
diagonal design matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .special import ConvergenceError

LAMBDA_KINDS = ("max", "mean", "corrected", "custom")


@dataclass(frozen=True)
class LambdaSequence:
    """A nonincreasing, nonnegative regularization sequence.

    Parameters
    ----------
    values : array_like
        ``lambda_1 >= lambda_2 >= ... >= lambda_m >= 0``.
    kind : str
        How the sequence was produced: ``"max"``, ``"mean"``,
        ``"corrected"`` or ``"custom"``.
    meta : dict
        Generator inputs, kept for report reproducibility.
    """

    values: np.ndarray
    kind: str = "custom"
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float).ravel()
        if v.size == 0:
            raise ValueError("lambda sequence must be nonempty")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValueError("lambda values must be finite and nonnegative")
        if np.any(np.diff(v) > 0):
            raise ValueError("lambda values must be nonincreasing")
        if self.kind not in LAMBDA_KINDS:
            raise ValueError(f"unknown lambda kind {self.kind!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def scaled(self, factor: float) -> "LambdaSequence":
        return LambdaSequence(self.values * float(factor), self.kind, dict(self.meta))

    def head(self, k: int) -> "LambdaSequence":
        meta = dict(self.meta, truncated_from=len(self))
        return LambdaSequence(self.values[:k], self.kind, meta)


def as_lambda(lam) -> np.ndarray:
    if isinstance(lam, LambdaSequence):
        return lam.values
    return LambdaSequence(lam).values


def _check_len(lam, v):
    if lam.shape[0] != v.shape[0]:
        raise ValueError(f"length mismatch: lambda has {lam.shape[0]} entries, vector has {v.shape[0]}")


def sorted_l1_norm(lam, b) -> float:
    """``J_lambda(b) = sum_i lambda_i |b|_(i)`` with ``|b|`` sorted descending."""
    lam = as_lambda(lam)
    b = np.asarray(b, dtype=float).ravel()
    _check_len(lam, b)
    return float(np.dot(lam, np.sort(np.abs(b))[::-1]))


def _pava_nonincreasing(d):
    """Project ``d`` onto nonincreasing sequences and clip at zero.

    Stack of averaged blocks: each new entry starts its own block and merges
    into its predecessor while the predecessor's mean does not exceed it.
    """
    starts = []
    sums = []
    means = []
    for i, v in enumerate(d):
        start, total, mean = i, v, v
        while means and means[-1] <= mean:
            start = starts.pop()
            total += sums.pop()
            means.pop()
            mean = total / (i - start + 1)
        starts.append(start)
        sums.append(total)
        means.append(mean)
    out = np.empty(len(d))
    ends = starts[1:] + [len(d)]
    for s, e, m in zip(starts, ends, means):
        out[s:e] = m if m > 0.0 else 0.0
    return out


def prox_sorted_l1(lam, y) -> np.ndarray:
    """Proximal operator of the sorted L1 norm.

    Returns the unique minimizer of ``0.5 * ||y - b||^2 + J_lambda(b)``.

    Ties in ``|y|`` are broken by a stable sort; the minimizer is unique, so
    the output does not depend on the tie order.
    """
    lam = as_lambda(lam)
    y = np.asarray(y, dtype=float).ravel()
    _check_len(lam, y)
    if y.size == 0:
        return y.copy()
    mag = np.abs(y)
    order = np.argsort(-mag, kind="stable")
    fitted = _pava_nonincreasing((mag[order] - lam).tolist())
    out = np.empty_like(y)
    out[order] = fitted
    return np.copysign(out, y)


def dual_norm(lam, x) -> float:
    """Dual norm of ``J_lambda``.

    ``max_k sum_{i<=k} |x|_(i) / sum_{i<=k} lambda_i``; the unit ball is
    ``C_lambda``.
    """
    lam = as_lambda(lam)
    x = np.asarray(x, dtype=float).ravel()
    _check_len(lam, x)
    if lam[0] <= 0:
        raise ValueError("dual norm requires lambda_1 > 0")
    if x.size == 0:
        return 0.0
    num = np.cumsum(np.sort(np.abs(x))[::-1])
    den = np.cumsum(lam)
    return float(np.max(num / den))


def in_dual_ball(lam, x, tol: float = 0.0) -> bool:
    """Whether ``x`` lies in ``C_lambda`` (dual norm at most ``1 + tol``)."""
    return dual_norm(lam, x) <= 1.0 + tol


@dataclass
class DiagonalSlopeResult:
    b: np.ndarray
    iterations: int
    gap: float
    infeas: float
    converged: bool


class DiagonalSlopeNotConverged(ConvergenceError):
    def __init__(self, result: DiagonalSlopeResult):
        super().__init__(
            f"diagonal SLOPE did not converge in {result.iterations} iterations "
            f"(gap={result.gap:.3g}, infeas={result.infeas:.3g})"
        )
        self.result = result


def _diag_certificate(lam, d, y, b):
    db = d * b
    resid = y - db
    gap = abs(float(np.dot(db, resid)) - sorted_l1_norm(lam, b))
    infeas = max(dual_norm(lam, d * resid) - 1.0, 0.0) if lam[0] > 0 else 0.0
    return gap, infeas


def solve_diagonal_slope(d, lam, y, tol: float = 1e-10, max_iter: int = 50_000, full_output: bool = False):
    """SLOPE with a diagonal design: minimize ``0.5||y - D b||^2 + J_lambda(b)``.

    FISTA with step ``1 / max(d_i^2)`` and adaptive restart. Stops once the
    gap ``|<Db, y - Db> - J_lambda(b)|`` is at most ``tol`` and
    ``d * (y - Db)`` is in the dual ball up to ``tol``.

    Raises
    ------
    DiagonalSlopeNotConverged
        After ``max_iter`` iterations; the exception carries the last iterate
        and its certificate.
    """
    d = np.asarray(d, dtype=float).ravel()
    lam = as_lambda(lam)
    y = np.asarray(y, dtype=float).ravel()
    _check_len(lam, y)
    if d.shape != y.shape:
        raise ValueError("d and y must have the same length")
    if np.any(d <= 0):
        raise ValueError("diagonal entries must be positive")

    step = 1.0 / np.max(d * d) if d.size else 1.0
    x = np.zeros_like(y)
    x_prev = x
    t = 1.0
    obj_prev = np.inf
    gap = infeas = np.inf
    for it in range(1, max_iter + 1):
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x + ((t - 1.0) / t_next) * (x - x_prev)
        x_new = prox_sorted_l1(lam * step, z - step * d * (d * z - y))
        r = y - d * x_new
        obj = 0.5 * float(r @ r) + sorted_l1_norm(lam, x_new)
        x_prev, x = x, x_new
        # adaptive restart
        t = 1.0 if obj > obj_prev else t_next
        obj_prev = obj
        gap, infeas = _diag_certificate(lam, d, y, x)
        if gap <= tol and infeas <= tol:
            res = DiagonalSlopeResult(x, it, gap, infeas, True)
            return res if full_output else x
    raise DiagonalSlopeNotConverged(DiagonalSlopeResult(x, max_iter, gap, infeas, False))
