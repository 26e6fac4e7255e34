"""Group partitions, per-group factorizations and the grouped sorted L1 norm."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .sorted_l1 import as_lambda, dual_norm, prox_sorted_l1, sorted_l1_norm

RANK_RTOL = 1e-10


@dataclass(frozen=True)
class GroupPartition:
    """Disjoint index sets covering ``0..p-1`` with positive weights.

    Parameters
    ----------
    groups : sequence of sequence of int
        Column indices of each group (0-based).
    weights : array_like, optional
        One positive weight per group; defaults to all ones.
    """

    groups: tuple
    weights: np.ndarray = None

    def __post_init__(self):
        groups = tuple(np.array(sorted(int(j) for j in g), dtype=np.intp) for g in self.groups)
        if len(groups) == 0:
            raise ValueError("partition needs at least one group")
        if any(g.size == 0 for g in groups):
            raise ValueError("groups must be nonempty")
        allidx = np.concatenate(groups)
        p = allidx.size
        if np.unique(allidx).size != p or allidx.min() != 0 or allidx.max() != p - 1:
            raise ValueError("groups must be disjoint and cover 0..p-1")
        w = np.ones(len(groups)) if self.weights is None else np.array(self.weights, dtype=float).ravel()
        if w.shape != (len(groups),):
            raise ValueError("need exactly one weight per group")
        if np.any(~np.isfinite(w)) or np.any(w <= 0):
            raise ValueError("weights must be positive")
        for g in groups:
            g.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_labels(cls, labels, weights=None) -> "GroupPartition":
        """Build from one group label per column; groups ordered by sorted label."""
        labels = np.asarray(labels)
        uniq = np.unique(labels)
        groups = [np.flatnonzero(labels == u) for u in uniq]
        return cls(tuple(groups), weights)

    @classmethod
    def from_sizes(cls, sizes, weights=None) -> "GroupPartition":
        """Consecutive blocks of the given sizes."""
        bounds = np.concatenate([[0], np.cumsum(sizes)])
        return cls(tuple(np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])), weights)

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def p(self) -> int:
        return int(sum(g.size for g in self.groups))

    @property
    def sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    def with_weights(self, weights) -> "GroupPartition":
        return GroupPartition(self.groups, weights)


def factorize_block(block: np.ndarray, rtol: float = RANK_RTOL):
    """Rank-revealing factorization ``block = U @ R`` via thin SVD.

    ``U`` has orthonormal columns, ``R`` has full row rank ``l``.  Singular
    values at or below ``rtol * s_max`` are dropped.  Also returns the
    minimum-norm right inverse ``R^+`` (so that ``R @ R^+ = I_l``).
    """
    u, s, vt = np.linalg.svd(block, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise ValueError("group submatrix has rank zero")
    r = int(np.sum(s > rtol * s[0]))
    U = u[:, :r]
    R = s[:r, None] * vt[:r]
    R_pinv = vt[:r].T / s[:r]
    return U, R, R_pinv


@dataclass(frozen=True, eq=False)
class GroupedDesign:
    """Design matrix with its per-group standardization ``X_I = U R``.

    ``Xtilde`` stacks the ``U`` blocks column-wise; coordinates of the
    standardized problem live in ``tilde_groups`` (a partition of
    ``0..p_tilde-1``).
    """

    X: np.ndarray
    partition: GroupPartition
    U_blocks: tuple = field(repr=False)
    R_blocks: tuple = field(repr=False)
    R_pinv_blocks: tuple = field(repr=False)
    ranks: np.ndarray
    Xtilde: np.ndarray = field(repr=False)
    tilde_groups: tuple = field(repr=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return self.partition.m

    @property
    def weights(self) -> np.ndarray:
        return self.partition.weights

    @cached_property
    def tilde_labels(self) -> np.ndarray:
        """Group index of each standardized coordinate."""
        return np.repeat(np.arange(self.m), self.ranks)

    @cached_property
    def tilde_starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.ranks)[:-1]])

    def block_norms(self, v) -> np.ndarray:
        """Euclidean norms of ``v`` restricted to each standardized block."""
        v = np.asarray(v, dtype=float)
        sq = np.add.reduceat(v * v, self.tilde_starts)
        return np.sqrt(sq)

    def to_standardized(self, b) -> np.ndarray:
        """``c`` with ``c_{I~_i} = R_i b_{I_i}``."""
        b = np.asarray(b, dtype=float)
        return np.concatenate([R @ b[g] for R, g in zip(self.R_blocks, self.partition.groups)])

    def from_standardized(self, c) -> np.ndarray:
        """Minimum-norm ``b`` with ``R_i b_{I_i} = c_{I~_i}`` for every group."""
        c = np.asarray(c, dtype=float)
        b = np.zeros(self.p)
        for Rp, g, tg in zip(self.R_pinv_blocks, self.partition.groups, self.tilde_groups):
            b[g] = Rp @ c[tg]
        return b

    @cached_property
    def group_orthogonality_defect(self) -> float:
        """Largest ``|X~_{I~_i}^T X~_{I~_j}|`` entry over pairs of distinct groups."""
        G = self.Xtilde.T @ self.Xtilde
        same = self.tilde_labels[:, None] == self.tilde_labels[None, :]
        G[same] = 0.0
        return float(np.max(np.abs(G))) if G.size else 0.0

    def with_weights(self, weights) -> "GroupedDesign":
        return GroupedDesign(
            self.X,
            self.partition.with_weights(weights),
            self.U_blocks,
            self.R_blocks,
            self.R_pinv_blocks,
            self.ranks,
            self.Xtilde,
            self.tilde_groups,
        )


def build_grouped_design(X, partition: GroupPartition, rtol: float = RANK_RTOL) -> GroupedDesign:
    """Factorize every group submatrix and assemble the standardized design.

    Raises
    ------
    ValueError
        If the column count disagrees with the partition or a group
        submatrix is identically zero.
    """
    X = np.array(X, dtype=float)
    if X.ndim != 2:
        raise ValueError("X must be a 2-d array")
    if X.shape[1] != partition.p:
        raise ValueError(f"X has {X.shape[1]} columns but the partition covers {partition.p}")
    U_blocks, R_blocks, Rp_blocks, ranks = [], [], [], []
    for i, g in enumerate(partition.groups):
        try:
            U, R, Rp = factorize_block(X[:, g], rtol)
        except ValueError:
            raise ValueError(f"group {i} has rank zero") from None
        U_blocks.append(U)
        R_blocks.append(R)
        Rp_blocks.append(Rp)
        ranks.append(U.shape[1])
    ranks = np.array(ranks, dtype=int)
    Xtilde = np.hstack(U_blocks)
    bounds = np.concatenate([[0], np.cumsum(ranks)])
    tilde_groups = tuple(np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:]))
    X.setflags(write=False)
    Xtilde.setflags(write=False)
    return GroupedDesign(X, partition, tuple(U_blocks), tuple(R_blocks), tuple(Rp_blocks), ranks, Xtilde, tilde_groups)


def group_effects(design: GroupedDesign, b, via: str = "R") -> np.ndarray:
    """Group effects ``||X_{I_i} b_{I_i}||_2``.

    ``via="R"`` evaluates ``||R_i b_{I_i}||_2`` (same value, cheaper);
    ``via="X"`` multiplies by the raw design.
    """
    b = np.asarray(b, dtype=float).ravel()
    if b.size != design.p:
        raise ValueError(f"expected a vector of length {design.p}")
    if via == "X":
        return np.array([np.linalg.norm(design.X[:, g] @ b[g]) for g in design.partition.groups])
    return design.block_norms(design.to_standardized(b))


def grouped_norm(lam, design: GroupedDesign, b) -> float:
    """``J_lambda(W [[b]])``, the sorted L1 norm of weighted group effects."""
    lam = as_lambda(lam)
    if lam.size != design.m:
        raise ValueError("lambda length must equal the number of groups")
    return sorted_l1_norm(lam, design.weights * group_effects(design, b))


def _starts(group_sizes):
    sizes = np.asarray(group_sizes, dtype=int)
    return np.concatenate([[0], np.cumsum(sizes)[:-1]]), sizes


def block_norms(v, group_sizes) -> np.ndarray:
    starts, _ = _starts(group_sizes)
    v = np.asarray(v, dtype=float)
    return np.sqrt(np.add.reduceat(v * v, starts))


def prox_grouped(lam, group_sizes, y) -> np.ndarray:
    """Prox of ``J_lambda([[.]])`` for consecutive unit-weight blocks.

    The block norms go through the sorted L1 prox; each block is then
    rescaled along its own direction.  A zero block maps to zero.
    """
    lam = as_lambda(lam)
    y = np.asarray(y, dtype=float).ravel()
    starts, sizes = _starts(group_sizes)
    if sizes.sum() != y.size:
        raise ValueError("group sizes do not add up to the vector length")
    norms = np.sqrt(np.add.reduceat(y * y, starts))
    c = prox_sorted_l1(lam, norms)
    scale = np.divide(c, norms, out=np.zeros_like(c), where=norms > 0)
    return y * np.repeat(scale, sizes)


def grouped_dual_norm(lam, group_sizes, x, weights=None) -> float:
    """Dual norm of the grouped sorted L1 norm: ``J^D_lambda(W^{-1} [[x]])``."""
    norms = block_norms(x, group_sizes)
    if weights is not None:
        norms = norms / np.asarray(weights, dtype=float)
    return dual_norm(lam, norms)
