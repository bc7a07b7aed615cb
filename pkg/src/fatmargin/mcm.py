"""Minimal Complexity Machine: LP formulations, training and prediction.

All variants minimise ``h`` (plus a weighted slack penalty) subject to every
training sample's functional margin lying between 1 and ``h``::

    h >= y_i * f(x_i) + q_i
    y_i * f(x_i) + q_i >= 1,   q_i >= 0

with ``f(x) = w @ x + b`` for the linear machine and
``f(x) = sum_j lambda_j K(x, x_j) + b`` for the kernel machine. The slack
enters the upper constraint with a plus sign; ``upper_slack_sign=-1`` flips
it for experiments.

LP variable order is ``[w or lambda, b, h, q]``; rows are all upper
constraints followed by all lower constraints.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .dataset import StandardizationParams
from .errors import ConfigurationError, StructureError, TrainingError
from .kernels import KernelSpec, gram_matrix, independent_columns
from .lp_solver import LPProblem, SolverOptions, Status, check_solution, solve_lp
from .membership import compute_memberships

logger = logging.getLogger(__name__)

SV_TOLERANCE = 1e-6
H_TOLERANCE = 1e-7
RANK_TOLERANCE = 1e-4
MAX_RANK_TOLERANCE = 1e-2
FEASIBILITY_CHECK = 1e-6


def _check_labels(y):
    y = np.asarray(y)
    if not np.all(np.isin(y, (-1, 1))):
        raise ConfigurationError("labels must be +1 or -1")
    return y.astype(np.float64)


def _check_weights(s, M):
    s = np.ones(M) if s is None else np.asarray(s, dtype=np.float64).ravel()
    if s.size != M:
        raise StructureError(f"{s.size} memberships for {M} samples")
    if np.any(s <= 0) or np.any(s > 1):
        raise ConfigurationError("memberships must lie in (0, 1]")
    return s


def _margin_lp(F, y, C, s, upper_slack_sign, names):
    """Shared LP assembly; ``F`` holds the per-sample features of f (X or Gram)."""
    M, p = F.shape
    y = _check_labels(y)
    if y.size != M:
        raise StructureError(f"{M} samples but {y.size} labels")
    hard = C is None
    if not hard and not C > 0:
        raise ConfigurationError(f"C must be positive, got {C}")
    n_q = 0 if hard else M
    N = p + 2 + n_q
    margin = np.zeros((M, N))
    margin[:, :p] = y[:, None] * F
    margin[:, p] = y
    upper = margin.copy()
    upper[:, p + 1] = -1.0
    lower = margin
    if not hard:
        upper[:, p + 2:] = upper_slack_sign * np.eye(M)
        lower[:, p + 2:] = np.eye(M)
    c = np.zeros(N)
    c[p + 1] = 1.0
    lo = np.full(N, -np.inf)
    if not hard:
        s = _check_weights(s, M)
        c[p + 2:] = C * s
        lo[p + 2:] = 0.0
    A = np.vstack([upper, lower])
    rels = ["<="] * M + [">="] * M
    rhs = np.concatenate([np.zeros(M), np.ones(M)])
    names = names + ["b", "h"] + [f"q{i}" for i in range(n_q)]
    return LPProblem(c, A, rels, rhs, lower=lo, names=names)


def build_linear_hard_lp(X, y):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    return _margin_lp(X, y, None, None, 1.0, [f"w{k}" for k in range(X.shape[1])])


def build_linear_soft_lp(X, y, C, memberships=None, upper_slack_sign=1.0):
    """Soft-margin LP; ``memberships=None`` weights every slack by 1."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    if C is None:
        raise ConfigurationError("soft-margin LP needs a value of C")
    return _margin_lp(X, y, C, memberships, upper_slack_sign, [f"w{k}" for k in range(X.shape[1])])


def build_kernel_lp(gram, y, C, memberships=None, upper_slack_sign=1.0, candidates=None):
    """Kernel LP over expansion coefficients; ``C=None`` gives the hard margin.

    If ``candidates`` is given, every other coefficient is fixed at zero
    through its bounds; the rows and variable layout are unchanged.
    """
    G = np.asarray(gram, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise StructureError(f"Gram matrix must be square, got shape {G.shape}")
    problem = _margin_lp(G, y, C, memberships, upper_slack_sign, [f"lambda{j}" for j in range(G.shape[0])])
    if candidates is not None:
        fixed = np.ones(G.shape[0], dtype=bool)
        fixed[np.asarray(candidates, dtype=np.int64)] = False
        problem.lower[: G.shape[0]][fixed] = 0.0
        problem.upper[: G.shape[0]][fixed] = 0.0
    return problem


def _signs(scores):
    return np.where(scores >= 0, 1, -1)


@dataclass
class LinearModel:
    w: np.ndarray
    b: float
    h: float
    C: float | None
    standardization: StandardizationParams
    objective: float = float("nan")
    upper_slack_sign: float = 1.0
    provenance: dict = field(default_factory=dict)

    kind = "linear"

    def decision_function(self, X):
        Z = self.standardization.transform(np.atleast_2d(X))
        return Z @ self.w + self.b

    def predict(self, X):
        return _signs(self.decision_function(X))

    @property
    def n_support(self):
        return None


@dataclass
class KernelModel:
    lambdas: np.ndarray  # full expansion over the training set
    b: float
    h: float
    support_indices: np.ndarray
    support_samples: np.ndarray  # standardized rows of the support vectors
    kernel: KernelSpec
    C: float | None
    standardization: StandardizationParams
    objective: float = float("nan")
    sv_tolerance: float = SV_TOLERANCE
    upper_slack_sign: float = 1.0
    rank_tolerance: float | None = None  # threshold actually used to pick expansion candidates
    provenance: dict = field(default_factory=dict)

    kind = "kernel"

    @property
    def support_lambdas(self):
        return self.lambdas[self.support_indices]

    @property
    def n_support(self):
        return int(self.support_indices.size)

    def decision_function(self, X):
        Z = self.standardization.transform(np.atleast_2d(X))
        if self.support_indices.size == 0:
            return np.full(Z.shape[0], self.b)
        K = gram_matrix(self.kernel, Z, self.support_samples)
        return K @ self.support_lambdas + self.b

    def predict(self, X):
        return _signs(self.decision_function(X))


def _single_or_batch(model, x):
    x = np.asarray(x, dtype=np.float64)
    n = model.standardization.mean.size
    if x.shape[-1] != n:
        raise StructureError(f"model expects {n} features, got {x.shape[-1]}")
    scores = model.decision_function(x)
    labels = _signs(scores)
    if x.ndim == 1:
        return int(labels[0]), float(scores[0])
    return labels, scores


def predict_linear(model, x):
    """(label, score) for one sample, or arrays of both for a 2-D batch."""
    return _single_or_batch(model, x)


def predict_kernel(model, x):
    return _single_or_batch(model, x)


def extract_support_vectors(lambdas, sv_tolerance=SV_TOLERANCE):
    """Indices j with |lambda_j| > sv_tolerance * max |lambda| (0-based)."""
    if sv_tolerance < 0:
        raise ConfigurationError("sv_tolerance must be nonnegative")
    lam = np.abs(np.asarray(lambdas, dtype=np.float64))
    if lam.size == 0 or lam.max() == 0.0:
        return np.zeros(0, dtype=np.int64)
    return np.flatnonzero(lam > sv_tolerance * lam.max())


def _prepare(X, y, standardize, fuzzy, memberships, delta):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y).astype(np.int64)
    if X.shape[0] != y.size:
        raise StructureError(f"{X.shape[0]} samples but {y.size} labels")
    if np.all(y == 1) or np.all(y == -1):
        raise ConfigurationError("training data contains a single class")
    params = StandardizationParams.fit(X) if standardize else StandardizationParams.identity(X.shape[1])
    Z = params.transform(X)
    if memberships is None and fuzzy:
        memberships = compute_memberships(Z, y, delta).values
    elif memberships is not None:
        memberships = np.asarray(memberships, dtype=np.float64)
    return Z, y, params, memberships


def _solve(problem, options, strict=False):
    """Solve and return an optimal solution; ``strict`` also rejects inaccurate ones."""
    sol = solve_lp(problem, options or SolverOptions())
    if sol.status is not Status.OPTIMAL:
        raise TrainingError(f"LP solver returned {sol.status.value}", sol.status)
    violation = check_solution(problem, sol).max_violation
    if violation > FEASIBILITY_CHECK:
        if strict:
            raise TrainingError(f"solution violates constraints by {violation:.3g}", sol.status)
        logger.warning("solution violates constraints by %.3g", violation)
    return sol


def _check_h(h):
    if h < 1.0 - H_TOLERANCE:
        raise TrainingError(f"optimal h = {h} is below 1")


def train_linear(X, y, C=None, memberships=None, *, fuzzy=False, delta=None, standardize=True,
                 upper_slack_sign=1.0, options=None):
    """Fit a linear MCM. ``C=None`` solves the hard-margin problem.

    With ``fuzzy=True`` memberships are computed from the standardized
    training features; an explicit ``memberships`` array takes precedence.
    """
    Z, y, params, s = _prepare(X, y, standardize, fuzzy, memberships, delta)
    if C is None:
        problem = build_linear_hard_lp(Z, y)
    else:
        problem = build_linear_soft_lp(Z, y, C, s, upper_slack_sign)
    sol = _solve(problem, options)
    n = Z.shape[1]
    w, b, h = sol.point[:n].copy(), float(sol.point[n]), float(sol.point[n + 1])
    _check_h(h)
    return LinearModel(w, b, h, C, params, sol.objective_value, upper_slack_sign)


def train_kernel(X, y, kernel, C=None, memberships=None, *, fuzzy=False, delta=None,
                 sv_tolerance=SV_TOLERANCE, rank_tolerance=RANK_TOLERANCE, standardize=True,
                 upper_slack_sign=1.0, options=None):
    """Fit a kernel MCM and keep only the support vectors for prediction.

    Expansion coefficients are restricted to a numerically independent set of
    training samples (pivoted Cholesky of the Gram matrix, residual threshold
    ``rank_tolerance``); the rest are fixed at zero. If the LP still fails the
    threshold is coarsened tenfold, up to ``MAX_RANK_TOLERANCE``.
    ``rank_tolerance=None`` disables the restriction.
    """
    if not isinstance(kernel, KernelSpec):
        raise ConfigurationError("kernel must be a KernelSpec")
    Z, y, params, s = _prepare(X, y, standardize, fuzzy, memberships, delta)
    G = gram_matrix(kernel, Z)
    tol = rank_tolerance
    while True:
        candidates = None if tol is None else independent_columns(G, tol)
        problem = build_kernel_lp(G, y, C, s, upper_slack_sign, candidates)
        try:
            sol = _solve(problem, options, strict=tol is not None and tol < MAX_RANK_TOLERANCE)
            break
        except TrainingError as exc:
            if tol is None or tol >= MAX_RANK_TOLERANCE or exc.status is Status.INFEASIBLE:
                raise
            logger.info("kernel LP failed at rank tolerance %g (%s); retrying", tol, exc)
            tol *= 10.0
    M = Z.shape[0]
    lam, b, h = sol.point[:M].copy(), float(sol.point[M]), float(sol.point[M + 1])
    _check_h(h)
    support = extract_support_vectors(lam, sv_tolerance)
    full = _signs(G @ lam + b)
    truncated = _signs(G[:, support] @ lam[support] + b)
    if not np.array_equal(full, truncated):
        logger.warning("support truncation at tolerance %g changed training labels; keeping all nonzero terms",
                       sv_tolerance)
        support = extract_support_vectors(lam, 0.0)
    return KernelModel(lam, b, h, support, Z[support].copy(), kernel, C, params, sol.objective_value,
                       sv_tolerance, upper_slack_sign, tol)
