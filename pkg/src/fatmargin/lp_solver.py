"""Dense two-phase primal simplex for small and medium linear programs.

Problems are stated as::

    minimize    c @ x
    subject to  A[i] @ x  (<=, >=, =)  rhs[i]
                lower <= x <= upper      (either side may be infinite)

Finite lower bounds are removed by shifting, an upper bound alone by
reflection, two finite bounds by an extra row. Free variables stay as single
tableau columns: they may enter with either sign (the column is negated when
entering downwards) and never leave the basis once in it.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import _kernels
from .errors import DataFormatError, StructureError

logger = logging.getLogger(__name__)


class Relation(str, Enum):
    LE = "<="
    GE = ">="
    EQ = "="


class Status(str, Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    UNBOUNDED = "Unbounded"
    ITERATION_LIMIT = "IterationLimit"


class LPProblem:
    """A linear program in inequality form with per-variable bounds.

    Parameters
    ----------
    objective : array_like, shape (N,)
    A : array_like, shape (m, N)
        Constraint coefficients, one row per constraint.
    relations : sequence of Relation or str
    rhs : array_like, shape (m,)
    lower, upper : array_like, shape (N,), optional
        Defaults are ``-inf`` and ``+inf`` (free variables).
    """

    def __init__(self, objective, A, relations, rhs, lower=None, upper=None, names=None):
        c = np.asarray(objective, dtype=np.float64).ravel()
        N = c.size
        A = np.asarray(A, dtype=np.float64)
        if A.size == 0:
            A = A.reshape(0, N)
        if A.ndim != 2 or A.shape[1] != N:
            raise StructureError(f"constraint matrix shape {A.shape} does not match {N} variables")
        rhs = np.asarray(rhs, dtype=np.float64).ravel()
        relations = tuple(Relation(r) for r in relations)
        if rhs.size != A.shape[0] or len(relations) != A.shape[0]:
            raise StructureError(
                f"{A.shape[0]} constraint rows but {len(relations)} relations and {rhs.size} right-hand sides"
            )
        lower = np.full(N, -np.inf) if lower is None else np.asarray(lower, dtype=np.float64).ravel()
        upper = np.full(N, np.inf) if upper is None else np.asarray(upper, dtype=np.float64).ravel()
        if lower.size != N or upper.size != N:
            raise StructureError("bounds must have one entry per variable")
        if np.any(lower > upper):
            raise StructureError("some variable has lower bound above upper bound")
        if np.any(np.isnan(A)) or np.any(np.isnan(c)) or np.any(~np.isfinite(rhs)):
            raise StructureError("non-finite coefficient")
        if np.any(lower == np.inf) or np.any(upper == -np.inf):
            raise StructureError("bound excludes every real value")
        self.objective = c
        self.A = A
        self.relations = relations
        self.rhs = rhs
        self.lower = lower
        self.upper = upper
        self.names = list(names) if names is not None else None

    @classmethod
    def from_constraints(cls, objective, constraints, bounds=None, names=None):
        """Build from ``[(coeffs, relation, rhs), ...]`` and ``[(lo, hi), ...]``."""
        N = len(objective)
        rows = []
        for coeffs, _, _ in constraints:
            if len(coeffs) != N:
                raise StructureError(f"constraint has {len(coeffs)} coefficients, expected {N}")
            rows.append(coeffs)
        A = np.array(rows, dtype=np.float64).reshape(len(rows), N)
        lower = upper = None
        if bounds is not None:
            if len(bounds) != N:
                raise StructureError("bounds must have one entry per variable")
            lower = [-np.inf if lo is None else lo for lo, _ in bounds]
            upper = [np.inf if hi is None else hi for _, hi in bounds]
        return cls(
            objective, A, [rel for _, rel, _ in constraints], [r for _, _, r in constraints],
            lower, upper, names,
        )

    @property
    def n_variables(self):
        return self.objective.size

    @property
    def n_constraints(self):
        return self.A.shape[0]

    @property
    def constraints(self):
        return [(self.A[i], self.relations[i], self.rhs[i]) for i in range(self.n_constraints)]

    def __eq__(self, other):
        if not isinstance(other, LPProblem):
            return NotImplemented
        return (
            self.relations == other.relations
            and np.array_equal(self.objective, other.objective)
            and np.array_equal(self.A, other.A)
            and np.array_equal(self.rhs, other.rhs)
            and np.array_equal(self.lower, other.lower)
            and np.array_equal(self.upper, other.upper)
        )

    __hash__ = None

    def __repr__(self):
        return f"LPProblem(n_variables={self.n_variables}, n_constraints={self.n_constraints})"


@dataclass
class LPSolution:
    status: Status
    point: np.ndarray
    objective_value: float
    iterations: int
    phase1_objective: float = 0.0
    ray: np.ndarray | None = None  # improving direction when Unbounded
    basis: list = field(default_factory=list, repr=False)


@dataclass
class SolverOptions:
    feasibility_tolerance: float = 1e-9
    optimality_tolerance: float = 1e-9
    pivot_tolerance: float = 1e-7
    max_iterations: int | None = None  # default 50 * (N + rows)
    degenerate_limit: int = 50  # consecutive degenerate pivots before Bland's rule
    refactor_every: int = 400
    backend: str | None = None


@dataclass
class ResidualReport:
    max_constraint_violation: float
    max_bound_violation: float

    @property
    def max_violation(self):
        return max(self.max_constraint_violation, self.max_bound_violation)

    def ok(self, tolerance):
        return self.max_violation <= tolerance


def check_solution(problem, solution, tolerance=None):
    """Worst constraint and bound violations of a point (or an LPSolution's point)."""
    x = solution.point if isinstance(solution, LPSolution) else solution
    x = np.asarray(x, dtype=np.float64)
    if x.size != problem.n_variables:
        raise StructureError(f"point has {x.size} entries, problem has {problem.n_variables} variables")
    worst = 0.0
    if problem.n_constraints:
        lhs = problem.A @ x
        gap = lhs - problem.rhs
        rel = np.array([r.value for r in problem.relations])
        viol = np.where(rel == "<=", np.maximum(gap, 0.0), np.where(rel == ">=", np.maximum(-gap, 0.0), np.abs(gap)))
        worst = float(viol.max())
    bound = max(
        float(np.max(np.maximum(problem.lower - x, 0.0), initial=0.0)),
        float(np.max(np.maximum(x - problem.upper, 0.0), initial=0.0)),
    )
    return ResidualReport(worst, bound)


class _StandardForm:
    """Problem rewritten as  A x' = b, b >= 0, plus a starting basis."""

    def __init__(self, problem):
        c, A, rhs = problem.objective, problem.A, problem.rhs
        lo, hi = problem.lower, problem.upper
        # Fixed variables (lower == upper) are substituted and get no column.
        active = np.flatnonzero(lo != hi)
        shift = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        sign = np.where(~np.isfinite(lo) & np.isfinite(hi), -1.0, 1.0)[active]
        lo, hi = lo[active], hi[active]
        N = active.size
        free = ~np.isfinite(lo) & ~np.isfinite(hi)
        A1 = A[:, active] * sign
        b1 = rhs - A @ shift
        rels = [r for r in problem.relations]
        boxed = np.flatnonzero(np.isfinite(lo) & np.isfinite(hi))
        if boxed.size:
            extra = np.zeros((boxed.size, N))
            extra[np.arange(boxed.size), boxed] = 1.0
            A1 = np.vstack([A1, extra])
            b1 = np.concatenate([b1, hi[boxed] - lo[boxed]])
            rels += [Relation.LE] * boxed.size
        m = A1.shape[0]
        flipped = b1 < 0
        A1[flipped] *= -1.0
        b1 = np.abs(b1)
        for i in np.flatnonzero(flipped):
            if rels[i] is Relation.LE:
                rels[i] = Relation.GE
            elif rels[i] is Relation.GE:
                rels[i] = Relation.LE
        n_slack = sum(r is not Relation.EQ for r in rels)
        art_rows = [i for i, r in enumerate(rels) if r is not Relation.LE]
        n_art = len(art_rows)
        ncols = N + n_slack + n_art
        full = np.zeros((m, ncols))
        full[:, :N] = A1
        basis = np.empty(m, dtype=np.int64)
        k = N
        for i, r in enumerate(rels):
            if r is Relation.LE:
                full[i, k] = 1.0
                basis[i] = k
                k += 1
            elif r is Relation.GE:
                full[i, k] = -1.0
                k += 1
        for j, i in enumerate(art_rows):
            full[i, N + n_slack + j] = 1.0
            basis[i] = N + n_slack + j
        self.N = N
        self.m = m
        self.ncols = ncols
        self.A = full
        self.b = b1
        self.cost = np.concatenate([c[active] * sign, np.zeros(ncols - N)])
        self.constant = float(c @ shift)
        self.active = active
        self.shift = shift
        self.sign = sign
        self.free = free
        self.art_start = N + n_slack
        self.basis = basis


class _Simplex:
    def __init__(self, problem, options):
        self.problem = problem
        self.opt = options
        self.kern = _kernels.get_backend(options.backend)
        sf = _StandardForm(problem)
        self.sf = sf
        m, ncols = sf.m, sf.ncols
        self.m = m
        # Rows 0..m-1 constraints, m phase-2 reduced costs, m+1 phase-1 reduced costs.
        T = np.zeros((m + 2, ncols + 1))
        T[:m, :ncols] = sf.A
        T[:m, -1] = sf.b
        T[m, :ncols] = sf.cost
        art_rows = np.flatnonzero(sf.basis >= sf.art_start)
        T[m + 1, :] = -T[art_rows].sum(axis=0)
        T[m + 1, sf.art_start:ncols] = 0.0
        self.T = T
        self.basis = sf.basis.copy()
        self.colsign = np.ones(ncols)  # -1 where a free column has been negated
        self.kind = np.ones(ncols, dtype=np.int8)
        self.kind[: sf.N][sf.free] = 2
        self.is_free_col = np.zeros(ncols, dtype=bool)
        self.is_free_col[: sf.N] = sf.free
        self.rows_alive = np.arange(m)
        self.iterations = 0
        N_rows = problem.n_constraints
        self.max_iterations = options.max_iterations or 50 * (problem.n_variables + N_rows)
        self.bland = False
        self.degenerate_run = 0

    def _skip_mask(self):
        return self.is_free_col[self.basis].astype(np.int8)

    def _iterate(self, cost_row, phase1=False):
        """Run pivots against ``cost_row`` until optimal; returns a status or None."""
        T, kern, opt = self.T, self.kern, self.opt
        since_refactor = 0
        barred = {}  # columns refused for want of a usable pivot element
        while True:
            m = self.m
            col, flip = kern.price(np.ascontiguousarray(T[cost_row, :-1]), self.kind, opt.optimality_tolerance, self.bland)
            if col < 0:
                if barred:
                    logger.debug("stopping with %d columns barred for tiny pivots", len(barred))
                    for j, k in barred.items():
                        self.kind[j] = k
                return None
            if self.iterations >= self.max_iterations:
                return Status.ITERATION_LIMIT
            if flip:
                T[:, col] *= -1.0
                self.colsign[col] *= -1.0
            skip = self._skip_mask()
            harris = opt.feasibility_tolerance
            row = kern.ratio_test(T, col, m, opt.pivot_tolerance, self.basis, skip, self.bland, harris)
            if row < 0:
                column = T[:m, col]
                if phase1 or np.any((column > 0.0) & (skip == 0)):
                    barred[col] = self.kind[col]
                    self.kind[col] = 0
                    continue
                self.unbounded_col = col
                return Status.UNBOUNDED
            step = max(T[row, -1], 0.0) / T[row, col]
            kern.pivot(T, row, col)
            leaving = self.basis[row]
            self.basis[row] = col
            if leaving >= self.sf.art_start:
                self.kind[leaving] = 0
                barred.pop(leaving, None)
            self.iterations += 1
            if step <= opt.feasibility_tolerance:
                self.degenerate_run += 1
                if not self.bland and self.degenerate_run >= opt.degenerate_limit:
                    self.bland = True
            else:
                self.degenerate_run = 0
                self.bland = False
                for j, k in barred.items():
                    self.kind[j] = k
                barred.clear()
            since_refactor += 1
            if since_refactor >= opt.refactor_every:
                self._refactor()
                since_refactor = 0

    def _current_matrix(self):
        A = self.sf.A[self.rows_alive] * self.colsign
        return A, self.sf.b[self.rows_alive]

    def _refactor(self):
        """Recompute the constraint rows as B^-1 [A | b] to shed accumulated error."""
        A, b = self._current_matrix()
        B = A[:, self.basis]
        try:
            rows = np.linalg.solve(B, np.column_stack([A, b]))
        except np.linalg.LinAlgError:
            logger.debug("basis matrix singular at refactorisation; keeping tableau")
            return
        m = self.m
        T = self.T
        T[:m] = rows
        T[:m, self.basis] = 0.0
        T[np.arange(m), self.basis] = 1.0
        cost = self.sf.cost * self.colsign
        for r in range(m, T.shape[0]):
            base = cost if r == m else self._phase1_cost()
            cb = base[self.basis]
            T[r, :-1] = base - cb @ T[:m, :-1]
            T[r, -1] = -(cb @ T[:m, -1])

    def _phase1_cost(self):
        c = np.zeros(self.sf.ncols)
        c[self.sf.art_start:] = 1.0
        return c

    def _drop_phase1(self):
        """Pivot zero-valued artificials out of the basis, deleting redundant rows."""
        T = self.T
        art_start = self.sf.art_start
        keep = []
        for i in range(self.m):
            if self.basis[i] < art_start:
                keep.append(i)
                continue
            row = np.abs(T[i, :art_start])
            row[self.kind[:art_start] == 0] = 0.0
            j = int(np.argmax(row)) if row.size else 0
            if row.size and row[j] > self.opt.pivot_tolerance:
                self.kern.pivot(T, i, j)
                self.basis[i] = j
                keep.append(i)
            else:
                logger.debug("constraint row %d is redundant", int(self.rows_alive[i]))
        keep = np.array(keep, dtype=np.int64)
        m = self.m
        cost_rows = T[[m]]
        ncols = art_start
        newT = np.zeros((keep.size + 1, ncols + 1))
        newT[: keep.size, :ncols] = T[keep, :ncols]
        newT[: keep.size, -1] = T[keep, -1]
        newT[keep.size, :ncols] = cost_rows[0, :ncols]
        newT[keep.size, -1] = cost_rows[0, -1]
        self.T = np.ascontiguousarray(newT)
        self.basis = np.ascontiguousarray(self.basis[keep])
        self.rows_alive = self.rows_alive[keep]
        self.m = keep.size
        self.kind = np.ascontiguousarray(self.kind[:ncols])
        self.colsign = self.colsign[:ncols]
        self.is_free_col = self.is_free_col[:ncols]
        self.sf.A = self.sf.A[:, :ncols]
        self.sf.cost = self.sf.cost[:ncols]
        self.sf.ncols = ncols

    def _point(self):
        sf = self.sf
        xs = np.zeros(self.T.shape[1] - 1)
        xs[self.basis] = self.T[: self.m, -1]
        xs *= self.colsign
        xs = xs[: sf.N]
        nonneg = ~sf.free
        xs[nonneg & (xs < 0) & (xs > -self.opt.feasibility_tolerance)] = 0.0
        x = sf.shift.copy()
        x[sf.active] += sf.sign * xs
        return x

    def _polish(self):
        """Recompute the basic solution directly from the original matrix."""
        A, b = self._current_matrix()
        B = A[:, self.basis]
        try:
            xb = np.linalg.solve(B, b)
        except np.linalg.LinAlgError:
            return
        if np.all(np.isfinite(xb)):
            self.T[: self.m, -1] = xb

    def solve(self):
        sf, T = self.sf, self.T
        phase1 = 0.0
        if np.any(self.basis >= sf.art_start):
            status = self._iterate(self.m + 1, phase1=True)
            if status is Status.ITERATION_LIMIT:
                return self._result(status)
            phase1 = -float(self.T[self.m + 1, -1]) + 0.0
            scale = 1.0 + float(np.max(sf.b, initial=0.0))
            if phase1 > self.opt.feasibility_tolerance * scale:
                return self._result(Status.INFEASIBLE, phase1=phase1)
        self._drop_phase1()
        self.bland = False
        self.degenerate_run = 0
        self._refactor()
        for _ in range(3):
            status = self._iterate(self.m)
            if status is not None:
                return self._result(status, phase1=phase1)
            self._refactor()
            # Optimality after refactorisation confirms the pivots were clean.
            col, _ = self.kern.price(np.ascontiguousarray(self.T[self.m, :-1]), self.kind,
                                     self.opt.optimality_tolerance, False)
            if col < 0:
                break
        self._polish()
        return self._result(Status.OPTIMAL, phase1=phase1)

    def _result(self, status, phase1=0.0):
        N = self.problem.n_variables
        ray = None
        if status is Status.INFEASIBLE:
            point = np.full(N, np.nan)
            value = math.nan
        else:
            point = self._point()
            value = float(self.problem.objective @ point)
            if status is Status.UNBOUNDED:
                ray = self._ray()
                value = -math.inf
        return LPSolution(status, point, value, self.iterations, phase1, ray, list(self.basis))

    def _ray(self):
        col = self.unbounded_col
        d = np.zeros(self.T.shape[1] - 1)
        d[col] = 1.0
        d[self.basis] = -self.T[: self.m, col]
        d *= self.colsign
        ray = np.zeros(self.problem.n_variables)
        ray[self.sf.active] = self.sf.sign * d[: self.sf.N]
        return ray


def solve_lp(problem, options=None, **kwargs):
    """Solve ``problem``; returns an LPSolution (never raises on infeasibility)."""
    if options is None:
        options = SolverOptions(**kwargs)
    elif kwargs:
        raise TypeError("pass either options or keyword overrides, not both")
    if not isinstance(problem, LPProblem):
        raise StructureError("expected an LPProblem")
    return _Simplex(problem, options).solve()


def dump_lp(problem):
    """Plain-text form of a problem; inverse of :func:`parse_lp`."""
    fmt = repr
    lines = ["# lp v1"]
    lines.append("objective: " + " ".join(fmt(float(v)) for v in problem.objective))
    lines.append("lower: " + " ".join(fmt(float(v)) for v in problem.lower))
    lines.append("upper: " + " ".join(fmt(float(v)) for v in problem.upper))
    lines.append(f"constraints: {problem.n_constraints}")
    for row, rel, rhs in problem.constraints:
        lines.append(" ".join(fmt(float(v)) for v in row) + f" {rel.value} {fmt(float(rhs))}")
    return "\n".join(lines) + "\n"


def parse_lp(text):
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]

    def header(line, key):
        if not line.startswith(key + ":"):
            raise DataFormatError(f"expected {key!r} header, got {line[:40]!r}")
        return line[len(key) + 1:].split()

    try:
        c = [float(v) for v in header(lines[0], "objective")]
        lo = [float(v) for v in header(lines[1], "lower")]
        hi = [float(v) for v in header(lines[2], "upper")]
        m = int(header(lines[3], "constraints")[0])
        rows, rels, rhs = [], [], []
        for line in lines[4: 4 + m]:
            parts = line.split()
            rows.append([float(v) for v in parts[:-2]])
            rels.append(parts[-2])
            rhs.append(float(parts[-1]))
        if len(rows) != m:
            raise DataFormatError(f"expected {m} constraint lines, found {len(rows)}")
    except (IndexError, ValueError) as exc:
        if isinstance(exc, DataFormatError):
            raise
        raise DataFormatError(f"malformed LP dump: {exc}") from exc
    return LPProblem(c, np.array(rows).reshape(m, len(c)), rels, rhs, lo, hi)
