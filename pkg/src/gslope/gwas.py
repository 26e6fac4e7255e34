"""Genotype screening, correlation clumping and group SLOPE on SNP groups.

Each SNP contributes an additive dummy (minor-allele count) and a
dominance dummy (heterozygote indicator).  SNPs are screened by a one-way
ANOVA over genotype classes, clumped around the smallest p-values by
absolute Pearson correlation, and the cluster representatives enter group
SLOPE as two-column groups with noise level estimated on the fly.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .groups import GroupPartition, build_grouped_design
from .lambdas import lambda_corrected
from .sigma import solve_with_sigma_estimation
from .solver import SolveOptions
from .special import f_sf

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class GenotypeMatrix:
    """``n x s`` minor-allele counts in ``{0, 1, 2}`` with SNP identifiers."""

    values: np.ndarray
    snp_ids: tuple = None

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 2:
            raise ValueError("genotypes must form a 2-d array")
        if not np.all(np.isin(v, (0, 1, 2))):
            raise ValueError("genotype entries must be 0, 1 or 2")
        if v.shape[0] < 2:
            raise ValueError("need at least two individuals")
        v = v.astype(np.int8)
        v.setflags(write=False)
        ids = tuple(f"snp{j}" for j in range(v.shape[1])) if self.snp_ids is None else tuple(str(i) for i in self.snp_ids)
        if len(ids) != v.shape[1]:
            raise ValueError("need one identifier per SNP")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "snp_ids", ids)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def s(self) -> int:
        return self.values.shape[1]


def _standardize(cols):
    cols = cols - cols.mean(axis=0)
    norms = np.linalg.norm(cols, axis=0)
    # a column that is constant up to round-off carries no information
    ok = norms > 1e-12 * np.sqrt(cols.shape[0])
    out = np.zeros_like(cols)
    out[:, ok] = cols[:, ok] / norms[ok]
    return out, ok


def dummy_encode(g: GenotypeMatrix):
    """Centered, unit-norm additive and dominance dummies.

    Returns ``(X_add, Z_dom, add_ok, dom_ok)``.  Constant columns are left
    as zeros and flagged ``False`` in the masks.
    """
    v = g.values.astype(float)
    X, add_ok = _standardize(v)
    Z, dom_ok = _standardize((g.values == 1).astype(float))
    mono = ~add_ok
    if np.any(mono):
        log.warning("%d monomorphic SNP(s) excluded", int(mono.sum()))
    return X, Z, add_ok, dom_ok


def anova_pvalues(g: GenotypeMatrix, y) -> np.ndarray:
    """One-way ANOVA p-values for equal phenotype means across genotypes.

    SNPs with a single genotype class get ``p = 1``.  With several classes
    but zero within-class variance, ``p = 0`` if the class means differ and
    ``p = 1`` otherwise.
    """
    y = np.asarray(y, dtype=float).ravel()
    if y.size != g.n:
        raise ValueError(f"phenotype has {y.size} entries, genotypes have {g.n} rows")
    n = g.n
    ybar = y.mean()
    sst = float(((y - ybar) ** 2).sum())
    cnt = np.stack([(g.values == c).sum(axis=0) for c in range(3)])
    tot = np.stack([((g.values == c) * y[:, None]).sum(axis=0) for c in range(3)])
    present = cnt > 0
    k = present.sum(axis=0)
    means = np.divide(tot, cnt, out=np.zeros_like(tot), where=present)
    ssb = (cnt * (means - ybar) ** 2).sum(axis=0)
    ssw = np.maximum(sst - ssb, 0.0)
    pv = np.ones(g.s)
    scale = max(sst, 1.0)
    for j in range(g.s):
        kj = int(k[j])
        if kj < 2 or ssb[j] <= 1e-14 * scale:
            continue
        if n - kj < 1 or ssw[j] <= 1e-14 * scale:
            pv[j] = 0.0
            continue
        F = (ssb[j] / (kj - 1)) / (ssw[j] / (n - kj))
        pv[j] = f_sf(kj - 1, n - kj, F)
    return pv


def genotype_correlation(values):
    """Provider of absolute Pearson correlations between columns of ``values``.

    Returns ``corr(j, idx)``, the correlations of column ``j`` with the
    columns ``idx``; constant columns correlate 0 with everything else.
    """
    Z, _ = _standardize(np.asarray(values, dtype=float))

    def corr(j, idx):
        return Z[:, idx].T @ Z[:, j]

    return corr


@dataclass
class ClumpResult:
    representatives: list
    clusters: dict

    def cluster_of(self, rep) -> list:
        return self.clusters[rep]


def clump(pvals, corr, pi: float, r: float) -> ClumpResult:
    """Greedy clumping of screened SNPs around their smallest p-values.

    Parameters
    ----------
    pvals : array_like
        One p-value per SNP.
    corr : callable or array_like
        ``corr(j, idx)`` returning correlations of SNP ``j`` with SNPs
        ``idx``, or a square correlation matrix.
    pi : float
        SNPs with ``p < pi`` are screened in.
    r : float
        SNPs with ``|correlation| >= r`` to the current representative join
        its cluster.

    Ties in p-value go to the lower index.
    """
    pvals = np.asarray(pvals, dtype=float)
    if not 0.0 < pi <= 1.0:
        raise ValueError("pi must lie in (0, 1]")
    if not 0.0 < r < 1.0:
        raise ValueError("r must lie in (0, 1)")
    if not callable(corr):
        C = np.asarray(corr, dtype=float)
        corr = lambda j, idx: C[idx, j]  # noqa: E731
    # stable sort on p, so equal p-values keep index order
    remaining = [int(j) for j in np.argsort(np.where(pvals < pi, pvals, np.inf), kind="stable") if pvals[j] < pi]
    reps, clusters = [], {}
    while remaining:
        j = remaining[0]
        rho = np.abs(np.asarray(corr(j, remaining), dtype=float))
        rho[0] = 1.0
        members = [i for i, c in zip(remaining, rho) if c >= r]
        reps.append(j)
        clusters[j] = sorted(members)
        taken = set(members)
        remaining = [i for i in remaining if i not in taken]
    return ClumpResult(reps, clusters)


@dataclass
class GeneReport:
    snp_ids: tuple
    n: int
    clumps: ClumpResult
    selected: list
    effects: dict
    sigma_hat: float
    converged: bool
    lambda_values: np.ndarray = field(repr=False, default=None)
    lambda_meta: dict = field(default_factory=dict)
    pvalues: np.ndarray = field(repr=False, default=None)

    @property
    def selected_snps(self) -> list:
        return sorted(i for j in self.selected for i in self.clumps.clusters[j])

    def to_dict(self) -> dict:
        ids = self.snp_ids
        return {
            "n": self.n,
            "s": len(ids),
            "screened": sum(len(c) for c in self.clumps.clusters.values()),
            "representatives": [ids[j] for j in self.clumps.representatives],
            "clusters": {ids[j]: [ids[i] for i in c] for j, c in self.clumps.clusters.items()},
            "selected": [ids[j] for j in self.selected],
            "selected_snps": [ids[j] for j in self.selected_snps],
            "effects": {ids[j]: float(e) for j, e in self.effects.items()},
            "sigma_hat": None if self.sigma_hat is None else float(self.sigma_hat),
            "converged": bool(self.converged),
            "lambda": {
                **self.lambda_meta,
                "values": [] if self.lambda_values is None else [float(v) for v in self.lambda_values],
            },
        }


def gene_gslope(g: GenotypeMatrix, y, pi: float = 0.05, r: float = 0.3, q: float = 0.1, opts: SolveOptions | None = None) -> GeneReport:
    """Screen, clump and run group SLOPE on cluster representatives.

    The phenotype is centered.  Each representative forms a group from its
    non-constant dummies; its rank comes from the factorization and its
    weight is ``sqrt(rank)``.  The penalty is the corrected sequence with
    ``m`` equal to the number of SNPs before screening, truncated to the
    number of groups.
    """
    y = np.asarray(y, dtype=float).ravel()
    pv = anova_pvalues(g, y)
    yc = y - y.mean()
    cl = clump(pv, genotype_correlation(g.values), pi, r)
    empty = GeneReport(g.snp_ids, g.n, cl, [], {}, None, True, None, {"kind": "corrected", "q": q, "m": g.s}, pv)
    if not cl.representatives:
        return empty

    X, Z, add_ok, dom_ok = dummy_encode(g)
    cols, labels = [], []
    for gi, j in enumerate(cl.representatives):
        for M, ok in ((X, add_ok), (Z, dom_ok)):
            if ok[j]:
                cols.append(M[:, j])
                labels.append(gi)
    design = build_grouped_design(np.column_stack(cols), GroupPartition.from_labels(labels))
    weights = np.sqrt(design.ranks)
    design = design.with_weights(weights)
    n_groups = design.m

    full = lambda_corrected(q, weights, design.ranks, g.s, g.n)
    lam = full.head(n_groups)
    if not np.array_equal(np.asarray(lam), np.asarray(full)[:n_groups]):
        raise AssertionError("truncated penalty differs from the leading entries")

    est = solve_with_sigma_estimation(design, lam, yc, opts)
    res = est.result
    reps = cl.representatives
    selected = [reps[i] for i in res.selected]
    effects = {reps[i]: float(res.effects[i]) for i in res.selected}
    meta = {
        "kind": "corrected",
        "q": q,
        "m": g.s,
        "n": g.n,
        "length": n_groups,
        "flat_from": full.meta.get("flat_from"),
    }
    return GeneReport(g.snp_ids, g.n, cl, selected, effects, est.sigma_hat, est.converged and res.converged, np.asarray(lam), meta, pv)
