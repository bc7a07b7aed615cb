# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops for the simplex tableau and the Gaussian Gram matrix.

Every routine mirrors a function of the same name in ``_pykernels``; the two
modules must stay interchangeable.
"""

import numpy as np

from libc.math cimport exp, fabs

BACKEND = "cython"


def pivot(double[:, ::1] T, Py_ssize_t r, Py_ssize_t c):
    """Pivot the tableau in place on element (r, c)."""
    cdef Py_ssize_t nrows = T.shape[0]
    cdef Py_ssize_t ncols = T.shape[1]
    cdef Py_ssize_t i, j
    cdef double inv, f
    cdef double* prow
    cdef double* row
    with nogil:
        prow = &T[r, 0]
        inv = 1.0 / prow[c]
        for j in range(ncols):
            prow[j] *= inv
        prow[c] = 1.0
        for i in range(nrows):
            if i == r:
                continue
            row = &T[i, 0]
            f = row[c]
            if f == 0.0:
                continue
            for j in range(ncols):
                row[j] -= f * prow[j]
            row[c] = 0.0


def ratio_test(double[:, ::1] T, Py_ssize_t c, Py_ssize_t nrows, double pivot_tol,
               long[::1] basis, signed char[::1] skip, bint bland, double harris_tol):
    """Leaving row for entering column ``c``, or -1 if no row limits the step.

    Two-pass Harris test: the step bound allows each basic variable to go
    ``harris_tol`` negative, and among rows whose exact ratio fits under that
    bound the largest pivot element wins (smallest basic index in Bland
    mode). Rows flagged in ``skip`` hold free basic variables and never leave.
    """
    cdef Py_ssize_t last = T.shape[1] - 1
    cdef Py_ssize_t i, best = -1
    cdef double a, rhs, bound, theta = 0.0
    cdef bint found = False
    with nogil:
        for i in range(nrows):
            a = T[i, c]
            if skip[i] or a <= pivot_tol:
                continue
            rhs = T[i, last]
            if rhs < 0.0:
                rhs = 0.0
            bound = (rhs + harris_tol) / a
            if not found or bound < theta:
                theta = bound
                found = True
        if found:
            for i in range(nrows):
                a = T[i, c]
                if skip[i] or a <= pivot_tol:
                    continue
                rhs = T[i, last]
                if rhs < 0.0:
                    rhs = 0.0
                if rhs / a > theta:
                    continue
                if best < 0:
                    best = i
                elif bland:
                    if basis[i] < basis[best]:
                        best = i
                elif a > T[best, c]:
                    best = i
    return best


def price(double[::1] cost, signed char[::1] kind, double tol, bint bland):
    """Entering column and whether it must be negated first.

    ``kind`` is 0 for columns that may not enter, 1 for nonnegative variables
    and 2 for free variables. Returns (-1, False) at optimality.
    """
    cdef Py_ssize_t n = cost.shape[0]
    cdef Py_ssize_t j, best = -1
    cdef double d, score, best_score = -tol
    cdef bint flip = False
    with nogil:
        for j in range(n):
            if kind[j] == 0:
                continue
            d = cost[j]
            if kind[j] == 2:
                score = -fabs(d)
            else:
                score = d
            if score < best_score:
                best = j
                best_score = score
                if bland:
                    break
    if best >= 0 and kind[best] == 2 and cost[best] > 0.0:
        flip = True
    return best, flip


def gaussian_gram(double[:, ::1] A, double[:, ::1] B, double gamma):
    """Matrix of exp(-gamma * ||A_i - B_j||^2)."""
    cdef Py_ssize_t m = A.shape[0], k = B.shape[0], n = A.shape[1]
    cdef Py_ssize_t i, j, d
    cdef double s, t
    out = np.empty((m, k), dtype=np.float64)
    cdef double[:, ::1] K = out
    with nogil:
        for i in range(m):
            for j in range(k):
                s = 0.0
                for d in range(n):
                    t = A[i, d] - B[j, d]
                    s += t * t
                K[i, j] = exp(-gamma * s)
    return out
