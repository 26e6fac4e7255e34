"""Independent reference implementations used by the tests."""

import numpy as np


def prox_objective(lam, y, A, B):
    big = np.maximum(np.abs(A), np.abs(B))
    small = np.minimum(np.abs(A), np.abs(B))
    return 0.5 * ((A - y[0]) ** 2 + (B - y[1]) ** 2) + lam[0] * big + lam[1] * small


def grid_prox_p2(lam, y, step=1e-4, coarse=1e-2, radius=None):
    """Minimize the two-dimensional prox objective on a grid of spacing ``step``.

    A coarse grid over a box containing the minimizer locates it; the
    objective is convex, so a fine grid around the coarse winner finds the
    minimizer to within ``step``.
    """
    y = np.asarray(y, dtype=float)
    half = radius if radius is not None else np.abs(y).max() + 1.0
    g = np.arange(-half, half + coarse / 2, coarse)
    A, B = np.meshgrid(g, g, indexing="ij")
    i, j = np.unravel_index(np.argmin(prox_objective(lam, y, A, B)), A.shape)
    a0, b0 = g[i], g[j]
    f = np.arange(-2 * coarse, 2 * coarse + step / 2, step)
    A, B = np.meshgrid(a0 + f, b0 + f, indexing="ij")
    i, j = np.unravel_index(np.argmin(prox_objective(lam, y, A, B)), A.shape)
    return np.array([A[i, j], B[i, j]])
