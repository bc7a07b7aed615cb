"""Kernel functions and Gram matrices."""

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import ConfigurationError, StructureError

LINEAR = "linear"
GAUSSIAN = "gaussian"


@dataclass(frozen=True)
class KernelSpec:
    """Linear kernel ``p @ q`` or Gaussian ``exp(-gamma * ||p - q||^2)``."""

    kind: str = GAUSSIAN
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in (LINEAR, GAUSSIAN):
            raise ConfigurationError(f"unknown kernel kind {self.kind!r}")
        if self.kind == GAUSSIAN:
            if self.gamma is None or not self.gamma > 0 or not np.isfinite(self.gamma):
                raise ConfigurationError("Gaussian kernel needs gamma > 0")

    @classmethod
    def linear(cls):
        return cls(LINEAR, None)

    @classmethod
    def gaussian(cls, gamma):
        return cls(GAUSSIAN, float(gamma))

    def to_dict(self):
        return {"kind": self.kind, "gamma": self.gamma}


def kernel_eval(spec, p, q):
    p = np.asarray(p, dtype=np.float64)
    q = np.asarray(q, dtype=np.float64)
    if p.shape != q.shape or p.ndim != 1:
        raise StructureError(f"kernel arguments have shapes {p.shape} and {q.shape}")
    if spec.kind == LINEAR:
        return float(p @ q)
    d = p - q
    return float(np.exp(-spec.gamma * (d @ d)))


def gram_matrix(spec, rows, cols=None, backend=None):
    """Kernel values between every row of ``rows`` and every row of ``cols``."""
    A = np.ascontiguousarray(np.atleast_2d(np.asarray(rows, dtype=np.float64)))
    B = A if cols is None else np.ascontiguousarray(np.atleast_2d(np.asarray(cols, dtype=np.float64)))
    if A.shape[1] != B.shape[1]:
        raise StructureError(f"samples have {A.shape[1]} and {B.shape[1]} features")
    if spec.kind == LINEAR:
        return A @ B.T
    return _kernels.get_backend(backend).gaussian_gram(A, B, spec.gamma)


def independent_columns(gram, tol=1e-8):
    """Greedy pivoted Cholesky: indices of numerically independent Gram columns.

    Picks the column with the largest residual diagonal until every residual
    falls below ``tol`` times the largest diagonal entry. Returned sorted.
    """
    G = np.asarray(gram, dtype=np.float64)
    M = G.shape[0]
    if M == 0:
        return np.zeros(0, dtype=np.int64)
    resid = np.diag(G).astype(np.float64).copy()
    limit = tol * resid.max()
    L = np.zeros((M, M))
    chosen = []
    for k in range(M):
        j = int(np.argmax(resid))
        if resid[j] <= limit:
            break
        chosen.append(j)
        col = (G[:, j] - L[:, :k] @ L[j, :k]) / np.sqrt(resid[j])
        L[:, k] = col
        resid -= col * col
        resid[chosen] = -np.inf
    return np.sort(np.array(chosen, dtype=np.int64))
