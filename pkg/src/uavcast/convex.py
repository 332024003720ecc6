"""Smooth convex programs, posynomial algebra, and a log-barrier solver.

The trajectory subproblem arrives here as a geometric program (posynomial
constraints, monomial objective) and is transformed into its convex
log-variable form; the power subproblem arrives as an explicit smooth
convex program.  Both are solved by the same interior-point routine:
phase-1 for a strictly feasible start, then a standard barrier path with
damped Newton steps and backtracking line search.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Hashable, Mapping, Sequence

import numpy as np

Key = Hashable

# Barrier/Newton tuning. kkt/feas tolerances are chosen well below the
# outer SCA stopping thresholds so subproblem error never dominates.
DEFAULT_KKT_TOL = 1e-6
DEFAULT_FEAS_TOL = 1e-8
DEFAULT_MAX_ITER = 500
_BARRIER_MU = 20.0
_NEWTON_STEPS_PER_STAGE = 60
_LINESEARCH_BETA = 0.5
_LINESEARCH_C = 0.25


class BadProgramError(ValueError):
    """A program violates a structural requirement (e.g. non-positive coefficient)."""


# ---------------------------------------------------------------------------
# Posynomial algebra
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Monomial:
    """c * prod(x_k ** a_k) over positive variables, with c > 0.

    Variables are identified by arbitrary hashable keys so callers can use
    structured names like ("x", n) without committing to a flat index order.
    """

    coeff: float
    exponents: tuple[tuple[Key, float], ...] = ()

    @staticmethod
    def of(coeff: float, exponents: Mapping[Key, float] | None = None) -> "Monomial":
        if not (coeff > 0.0) or not math.isfinite(coeff):
            raise BadProgramError(f"monomial coefficient must be positive, got {coeff!r}")
        exps = tuple(sorted(((k, float(a)) for k, a in (exponents or {}).items() if a != 0.0),
                            key=lambda kv: repr(kv[0])))
        return Monomial(float(coeff), exps)

    def exponent_map(self) -> dict[Key, float]:
        return dict(self.exponents)

    def log_value(self, point: Mapping[Key, float]) -> float:
        total = math.log(self.coeff)
        for k, a in self.exponents:
            total += a * math.log(point[k])
        return total

    def value(self, point: Mapping[Key, float]) -> float:
        return math.exp(self.log_value(point))

    def __mul__(self, other: "Monomial") -> "Monomial":
        exps = self.exponent_map()
        for k, a in other.exponents:
            exps[k] = exps.get(k, 0.0) + a
        return Monomial.of(self.coeff * other.coeff, exps)

    def __pow__(self, power: float) -> "Monomial":
        return Monomial.of(self.coeff ** power, {k: a * power for k, a in self.exponents})

    def scaled(self, factor: float) -> "Monomial":
        return Monomial.of(self.coeff * factor, self.exponent_map())

    def bind(self, constants: Mapping[Key, float]) -> "Monomial":
        """Fold known-constant variables into the coefficient."""
        coeff = self.coeff
        exps: dict[Key, float] = {}
        for k, a in self.exponents:
            if k in constants:
                coeff *= constants[k] ** a
            else:
                exps[k] = a
        return Monomial.of(coeff, exps)

    def keys(self) -> set[Key]:
        return {k for k, _ in self.exponents}


@dataclass(frozen=True)
class Posynomial:
    """Sum of monomials; every coefficient positive."""

    terms: tuple[Monomial, ...]

    @staticmethod
    def of(terms: Sequence[Monomial]) -> "Posynomial":
        if not terms:
            raise BadProgramError("posynomial needs at least one term")
        return Posynomial(tuple(terms))

    def value(self, point: Mapping[Key, float]) -> float:
        return sum(t.value(point) for t in self.terms)

    def weights(self, point: Mapping[Key, float], clamp: float = 1e-9) -> np.ndarray:
        """Per-term shares of the total value at `point`; sums to 1.

        Shares below `clamp` are clamped and the vector renormalized so the
        (term/share)**(-share) factors in a condensed monomial stay finite.
        """
        vals = np.array([t.value(point) for t in self.terms])
        w = vals / vals.sum()
        if (w < clamp).any():
            w = np.maximum(w, clamp)
            w = w / w.sum()
        return w

    def condense(self, point: Mapping[Key, float], clamp: float = 1e-9) -> Monomial:
        """Best monomial under-estimator that is tight at `point` (AM-GM)."""
        w = self.weights(point, clamp=clamp)
        log_coeff = 0.0
        exps: dict[Key, float] = {}
        for wi, term in zip(w, self.terms):
            log_coeff += wi * (math.log(term.coeff) - math.log(wi))
            for k, a in term.exponents:
                exps[k] = exps.get(k, 0.0) + wi * a
        return Monomial.of(math.exp(log_coeff), exps)

    def bind(self, constants: Mapping[Key, float]) -> "Posynomial":
        return Posynomial(tuple(t.bind(constants) for t in self.terms))

    def keys(self) -> set[Key]:
        out: set[Key] = set()
        for t in self.terms:
            out |= t.keys()
        return out

    def __mul__(self, mono: Monomial) -> "Posynomial":
        return Posynomial(tuple(t * mono for t in self.terms))


@dataclass
class GeometricProgram:
    """min objective (monomial) s.t. each constraint posynomial <= 1."""

    objective: Monomial
    constraints: list[Posynomial]
    var_order: list[Key]

    def all_keys(self) -> set[Key]:
        keys = self.objective.keys()
        for c in self.constraints:
            keys |= c.keys()
        return keys


# ---------------------------------------------------------------------------
# Convex program interface
# ---------------------------------------------------------------------------

class ConvexProgram:
    """Smooth convex program: min f0(x) s.t. g_i(x) <= 0.

    Subclasses provide batched values/Jacobians/weighted Hessians so the
    barrier solver works on dense arrays rather than per-constraint calls.
    """

    num_vars: int
    warm_start: np.ndarray | None = None

    @property
    def num_constraints(self) -> int:
        raise NotImplementedError

    def in_domain(self, x: np.ndarray) -> bool:
        return True

    def objective_value(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def objective_grad(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def objective_hess(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def constraint_values(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def constraint_jacobian(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def constraint_hess_weighted(self, x: np.ndarray, w: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def barrier_value(self, x: np.ndarray, t: float) -> float:
        """t*f0(x) - sum(log(-g(x))), +inf outside the domain/interior."""
        if not self.in_domain(x):
            return math.inf
        g = self.constraint_values(x)
        if not np.all(np.isfinite(g)) or (g >= 0.0).any():
            return math.inf
        return t * self.objective_value(x) - float(np.log(-g).sum())

    def max_step(self, x: np.ndarray, d: np.ndarray) -> float:
        """Largest step along d before a cheaply-computable constraint hits
        its boundary; inf when the program has nothing cheap to offer."""
        return math.inf


@dataclass
class SolveReport:
    x: np.ndarray
    objective: float
    max_violation: float
    kkt_residual: float
    iterations: int
    status: str  # "optimal" | "max_iter" | "infeasible"


class SmoothFunction:
    """Scalar convex function given by (value, grad, hess) callables."""

    def __init__(self, value: Callable[[np.ndarray], float],
                 grad: Callable[[np.ndarray], np.ndarray],
                 hess: Callable[[np.ndarray], np.ndarray]):
        self.value = value
        self.grad = grad
        self.hess = hess


class GenericProgram(ConvexProgram):
    """Convex program assembled from SmoothFunction objects plus box bounds."""

    def __init__(self, num_vars: int, objective: SmoothFunction,
                 inequality_constraints: Sequence[SmoothFunction] = (),
                 variable_bounds: Sequence[tuple[float | None, float | None]] | None = None,
                 warm_start: np.ndarray | None = None,
                 domain: Callable[[np.ndarray], bool] | None = None):
        self.num_vars = num_vars
        self.objective = objective
        self.functions = list(inequality_constraints)
        self._domain = domain
        if variable_bounds is not None:
            for j, (lo, hi) in enumerate(variable_bounds):
                if lo is not None:
                    self.functions.append(_bound_constraint(num_vars, j, lo, lower=True))
                if hi is not None:
                    self.functions.append(_bound_constraint(num_vars, j, hi, lower=False))
        self.warm_start = None if warm_start is None else np.asarray(warm_start, dtype=float)

    @property
    def num_constraints(self) -> int:
        return len(self.functions)

    def in_domain(self, x: np.ndarray) -> bool:
        return True if self._domain is None else self._domain(x)

    def objective_value(self, x):
        return float(self.objective.value(x))

    def objective_grad(self, x):
        return np.asarray(self.objective.grad(x), dtype=float)

    def objective_hess(self, x):
        return np.asarray(self.objective.hess(x), dtype=float)

    def constraint_values(self, x):
        return np.array([f.value(x) for f in self.functions], dtype=float)

    def constraint_jacobian(self, x):
        if not self.functions:
            return np.zeros((0, self.num_vars))
        return np.vstack([f.grad(x) for f in self.functions])

    def constraint_hess_weighted(self, x, w):
        H = np.zeros((self.num_vars, self.num_vars))
        for wi, f in zip(w, self.functions):
            if wi != 0.0:
                H += wi * f.hess(x)
        return H


def _bound_constraint(n: int, j: int, bound: float, lower: bool) -> SmoothFunction:
    sign = -1.0 if lower else 1.0
    g = np.zeros(n)
    g[j] = sign
    H = np.zeros((n, n))
    return SmoothFunction(
        value=lambda x, j=j, b=bound, s=sign: s * x[j] - s * b,
        grad=lambda x, g=g: g,
        hess=lambda x, H=H: H,
    )


class LogSumExpProgram(ConvexProgram):
    """min c.y + c0 s.t. logsumexp(A_i y + b_i) <= 0 per constraint block."""

    def __init__(self, obj_coef: np.ndarray, obj_const: float,
                 term_matrix: np.ndarray, term_offset: np.ndarray,
                 block_starts: np.ndarray, warm_start: np.ndarray | None = None):
        self.obj_coef = np.asarray(obj_coef, dtype=float)
        self.obj_const = float(obj_const)
        self.A = np.asarray(term_matrix, dtype=float)
        self.b = np.asarray(term_offset, dtype=float)
        self.starts = np.asarray(block_starts, dtype=np.intp)
        self.num_vars = self.obj_coef.shape[0]
        self.warm_start = None if warm_start is None else np.asarray(warm_start, dtype=float)
        counts = np.diff(np.append(self.starts, self.A.shape[0]))
        if (counts <= 0).any():
            raise BadProgramError("every constraint block needs at least one term")
        self._block_of_term = np.repeat(np.arange(self.starts.size), counts)

    @property
    def num_constraints(self) -> int:
        return int(self.starts.size)

    def objective_value(self, x):
        return float(self.obj_coef @ x + self.obj_const)

    def objective_grad(self, x):
        return self.obj_coef.copy()

    def objective_hess(self, x):
        return np.zeros((self.num_vars, self.num_vars))

    def _softmax(self, x):
        z = self.A @ x + self.b
        zmax = np.maximum.reduceat(z, self.starts)
        e = np.exp(z - zmax[self._block_of_term])
        sums = np.add.reduceat(e, self.starts)
        vals = zmax + np.log(sums)
        s = e / sums[self._block_of_term]
        return vals, s

    def constraint_values(self, x):
        return self._softmax(x)[0]

    def constraint_jacobian(self, x):
        _, s = self._softmax(x)
        return np.add.reduceat(s[:, None] * self.A, self.starts, axis=0)

    def constraint_hess_weighted(self, x, w):
        _, s = self._softmax(x)
        J = np.add.reduceat(s[:, None] * self.A, self.starts, axis=0)
        sw = s * np.asarray(w)[self._block_of_term]
        H = self.A.T @ (self.A * sw[:, None])
        H -= (J * np.asarray(w)[:, None]).T @ J
        return H


def gp_to_convex(gp: GeometricProgram,
                 warm_point: Mapping[Key, float] | None = None) -> LogSumExpProgram:
    """Log-variable transform y = ln x of a geometric program.

    Monomials become affine forms, posynomial constraints become
    log-sum-exp blocks; the monomial objective becomes linear.
    """
    index = {k: j for j, k in enumerate(gp.var_order)}
    missing = gp.all_keys() - set(index)
    if missing:
        raise BadProgramError(f"variables missing from var_order: {sorted(map(repr, missing))}")
    n = len(gp.var_order)

    obj_coef = np.zeros(n)
    for k, a in gp.objective.exponents:
        obj_coef[index[k]] += a
    obj_const = math.log(gp.objective.coeff)

    rows: list[np.ndarray] = []
    offs: list[float] = []
    starts: list[int] = []
    for ci, posy in enumerate(gp.constraints):
        starts.append(len(rows))
        for ti, term in enumerate(posy.terms):
            if not (term.coeff > 0.0):
                raise BadProgramError(f"constraint {ci} term {ti} has non-positive coefficient {term.coeff!r}")
            row = np.zeros(n)
            for k, a in term.exponents:
                row[index[k]] += a
            rows.append(row)
            offs.append(math.log(term.coeff))

    warm = None
    if warm_point is not None:
        warm = np.array([math.log(warm_point[k]) for k in gp.var_order])

    return LogSumExpProgram(obj_coef, obj_const,
                            np.vstack(rows) if rows else np.zeros((0, n)),
                            np.array(offs), np.array(starts, dtype=np.intp),
                            warm_start=warm)


# ---------------------------------------------------------------------------
# Barrier solver
# ---------------------------------------------------------------------------

def _solve_psd(H: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    n = H.shape[0]
    scale = max(1.0, float(np.trace(H)) / n)
    reg = 0.0
    for _ in range(12):
        try:
            L = np.linalg.cholesky(H + reg * np.eye(n))
            return np.linalg.solve(L.T, np.linalg.solve(L, rhs))
        except np.linalg.LinAlgError:
            reg = 1e-12 * scale if reg == 0.0 else reg * 100.0
    return np.linalg.lstsq(H + reg * np.eye(n), rhs, rcond=None)[0]


_DECREMENT_TOL = 1e-9  # squared Newton decrement at which a center is accepted


def _center(program: ConvexProgram, x: np.ndarray, t: float,
            max_steps: int) -> tuple[np.ndarray, int, float]:
    """Damped Newton on t*f0(x) - sum(log(-g_i(x))) from a strictly feasible x.

    Stops on the squared Newton decrement (the affine-invariant measure;
    Euclidean gradient norms are meaningless next to barrier curvature).
    Returns (point, steps, final squared decrement).
    """
    steps = 0
    dec2 = math.inf
    for _ in range(max_steps):
        g = program.constraint_values(x)
        J = program.constraint_jacobian(x)
        inv = 1.0 / (-g)
        grad = t * program.objective_grad(x) + J.T @ inv
        H = t * program.objective_hess(x)
        H = H + J.T @ ((inv ** 2)[:, None] * J)
        H = H + program.constraint_hess_weighted(x, inv)
        d = _solve_psd(H, -grad)
        dec2 = max(float(-grad @ d), 0.0)
        if dec2 / 2.0 <= _DECREMENT_TOL:
            break
        base = t * program.objective_value(x) - float(np.log(-g).sum())
        alpha = min(1.0, 0.995 * program.max_step(x, d))
        while alpha > 1e-14:
            cand = x + alpha * d
            val = program.barrier_value(cand, t)
            if val <= base - _LINESEARCH_C * alpha * dec2:
                x = cand
                break
            alpha *= _LINESEARCH_BETA
        else:
            break
        steps += 1
    return x, steps, dec2


class _Phase1(ConvexProgram):
    """min s over (x, s) s.t. g_i(x) - s <= 0, |x - x0| <= box.

    The box keeps the subproblem bounded: directions that drive some g_i to
    -inf (slack epigraph variables) would otherwise sink the barrier.
    """

    _BOX = 20.0

    def __init__(self, base: ConvexProgram, x0: np.ndarray):
        self.base = base
        self.x0 = np.asarray(x0, dtype=float).copy()
        self.num_vars = base.num_vars + 1
        self.warm_start = None

    @property
    def num_constraints(self) -> int:
        return self.base.num_constraints + 2 * self.base.num_vars

    def in_domain(self, x):
        return self.base.in_domain(x[:-1])

    def objective_value(self, x):
        return float(x[-1])

    def objective_grad(self, x):
        g = np.zeros(self.num_vars)
        g[-1] = 1.0
        return g

    def objective_hess(self, x):
        return np.zeros((self.num_vars, self.num_vars))

    def constraint_values(self, x):
        delta = x[:-1] - self.x0
        return np.concatenate([self.base.constraint_values(x[:-1]) - x[-1],
                               delta - self._BOX, -delta - self._BOX])

    def constraint_jacobian(self, x):
        J = self.base.constraint_jacobian(x[:-1])
        n = self.base.num_vars
        top = np.hstack([J, -np.ones((J.shape[0], 1))])
        eye = np.hstack([np.eye(n), np.zeros((n, 1))])
        return np.vstack([top, eye, -eye])

    def constraint_hess_weighted(self, x, w):
        H = np.zeros((self.num_vars, self.num_vars))
        m = self.base.num_constraints
        H[:-1, :-1] = self.base.constraint_hess_weighted(x[:-1], np.asarray(w)[:m])
        return H


def _phase1(program: ConvexProgram, x0: np.ndarray, feas_tol: float,
            max_newton: int) -> tuple[np.ndarray, float, int]:
    """Drive max constraint violation negative; returns (x, final s, newton steps)."""
    aux = _Phase1(program, x0)
    g0 = program.constraint_values(x0)
    s = float(np.max(g0)) + 0.05 * (1.0 + abs(float(np.max(g0))))
    z = np.append(x0, s)
    t = 1.0
    used = 0
    target = -1e-7
    t_final = aux.num_constraints / min(1e-10, 0.01 * feas_tol)
    while used < max_newton:
        z, steps, _ = _center(aux, z, t, max_steps=_NEWTON_STEPS_PER_STAGE)
        used += max(steps, 1)
        if z[-1] < target or t >= t_final:
            break
        t = min(t * _BARRIER_MU, t_final)
    return z[:-1], float(z[-1]), used


def solve(program: ConvexProgram,
          kkt_tol: float = DEFAULT_KKT_TOL,
          feas_tol: float = DEFAULT_FEAS_TOL,
          max_iter: int = DEFAULT_MAX_ITER,
          t0: float = 1.0) -> SolveReport:
    """Barrier solve. Deterministic: identical inputs give identical reports.

    `t0` is the initial barrier parameter; callers re-solving a slightly
    perturbed program from its previous solution may start higher to skip
    early stages.
    """
    if program.warm_start is None:
        raise BadProgramError("program needs a warm_start point inside the domain")
    x = np.asarray(program.warm_start, dtype=float).copy()
    if not program.in_domain(x):
        raise BadProgramError("warm_start is outside the objective domain")
    m = program.num_constraints
    if m == 0:
        raise BadProgramError("programs without constraints are not supported")

    total = 0
    g = program.constraint_values(x)
    # A barely-interior start (g_i < 0 by any margin the log can represent)
    # is fine for the barrier; phase-1 is only for genuine boundary/violation.
    if float(np.max(g)) >= -1e-14:
        x, s, used = _phase1(program, x, feas_tol, max_newton=max_iter)
        total += used
        g = program.constraint_values(x)
        viol = float(np.max(g))
        if s >= -1e-12:
            status = "max_iter" if viol <= feas_tol else "infeasible"
            return SolveReport(x=x, objective=program.objective_value(x),
                               max_violation=max(viol, 0.0),
                               kkt_residual=math.inf, iterations=total, status=status)

    # The barrier certificate: at an (inexactly) centered point the implicit
    # multipliers 1/(t * -g_i) are dual feasible and the duality gap is m/t,
    # so running t up to m/kkt_tol certifies kkt_tol-optimality.
    t_final = m / kkt_tol
    t = min(max(t0, 1.0), t_final)
    dec2 = math.inf
    while total < max_iter:
        x, steps, dec2 = _center(program, x, t, max_steps=_NEWTON_STEPS_PER_STAGE)
        total += max(steps, 1)
        if t >= t_final and dec2 / 2.0 <= _DECREMENT_TOL:
            break
        if t >= t_final:
            break  # centering stalled at the final stage; report honestly below
        t = min(t * _BARRIER_MU, t_final)

    g = program.constraint_values(x)
    viol = max(float(np.max(g)), 0.0)
    res = m / t if dec2 / 2.0 <= _DECREMENT_TOL else math.inf
    status = "optimal" if (res <= kkt_tol and viol <= feas_tol and total < max_iter) \
        else "max_iter"
    return SolveReport(x=x, objective=program.objective_value(x), max_violation=viol,
                       kkt_residual=res, iterations=total, status=status)


def dump_program(gp: GeometricProgram) -> str:
    """Plain-text form of a GP (variables, terms, exponents) for offline inspection."""
    lines = ["variables: " + " ".join(repr(k) for k in gp.var_order)]
    def fmt(m: Monomial) -> str:
        parts = [f"{m.coeff:.9g}"]
        parts += [f"{k!r}^{a:.9g}" for k, a in m.exponents]
        return " * ".join(parts)
    lines.append("objective: " + fmt(gp.objective))
    for i, c in enumerate(gp.constraints):
        lines.append(f"constraint {i}: " + " + ".join(fmt(t) for t in c.terms) + " <= 1")
    return "\n".join(lines)
