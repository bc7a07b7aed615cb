"""Pure numpy fallback for the compiled kernels in ``_ckernels.pyx``."""

import numpy as np

BACKEND = "python"


def pivot(T, r, c):
    """Pivot the tableau in place on element (r, c)."""
    prow = T[r]
    prow *= 1.0 / prow[c]
    prow[c] = 1.0
    col = T[:, c].copy()
    col[r] = 0.0
    rows = np.flatnonzero(col)
    if rows.size:
        T[rows] -= np.multiply.outer(col[rows], prow)
        T[rows, c] = 0.0


def ratio_test(T, c, nrows, pivot_tol, basis, skip, bland, harris_tol):
    """Leaving row for entering column ``c``, or -1 if no row limits the step."""
    a = T[:nrows, c]
    rows = np.flatnonzero((a > pivot_tol) & (skip[:nrows] == 0))
    if rows.size == 0:
        return -1
    rhs = np.maximum(T[rows, -1], 0.0)
    theta = ((rhs + harris_tol) / a[rows]).min()
    fits = rows[rhs / a[rows] <= theta]
    if bland:
        return int(fits[np.argmin(basis[fits])])
    return int(fits[np.argmax(a[fits])])


def price(cost, kind, tol, bland):
    """Entering column and whether it must be negated first."""
    score = np.where(kind == 2, -np.abs(cost), cost)
    score = np.where(kind == 0, np.inf, score)
    candidates = np.flatnonzero(score < -tol)
    if candidates.size == 0:
        return -1, False
    if bland:
        best = int(candidates[0])
    else:
        # argmin returns the first (lowest-index) minimiser.
        best = int(np.argmin(score))
    return best, bool(kind[best] == 2 and cost[best] > 0.0)


def gaussian_gram(A, B, gamma):
    """Matrix of exp(-gamma * ||A_i - B_j||^2)."""
    diff = A[:, None, :] - B[None, :, :]
    return np.exp(-gamma * np.einsum("ijk,ijk->ij", diff, diff))
