"""Smooth nonconvex NLP solver: augmented Lagrangian with multistart.

Problems are boxes plus smooth equality and inequality constraints,

    min f(x)  s.t.  c(x) = 0,  g(x) <= 0,  lb <= x <= ub.

The solver runs an augmented-Lagrangian outer loop whose box-constrained
inner subproblems are handled by L-BFGS-B, with first-order multiplier
updates and a penalty schedule. Instances may supply a fused
value-and-gradient of the augmented Lagrangian (the compiled kernel path);
otherwise it is composed from the parts.

Everything is deterministic given (instance, start point, settings); the
multistart driver derives one child seed per start index so the first k
starts of any run agree with a k-start run at the same seed.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import fmin_l_bfgs_b

try:  # fast reverse-communication path (scipy >= 1.15 integer-task API)
    from scipy.optimize import _lbfgsb as _lbfgsb_raw
    _HAVE_RAW_LBFGSB = hasattr(_lbfgsb_raw, "setulb")
except ImportError:  # pragma: no cover
    _lbfgsb_raw = None
    _HAVE_RAW_LBFGSB = False


class _BoxSpec:
    """Precomputed bound arrays in the Fortran nbd encoding."""

    def __init__(self, lower: np.ndarray, upper: np.ndarray):
        n = lower.size
        self.low = np.where(np.isfinite(lower), lower, 0.0)
        self.upp = np.where(np.isfinite(upper), upper, 0.0)
        has_l = np.isfinite(lower)
        has_u = np.isfinite(upper)
        nbd = np.zeros(n, dtype=np.int32)
        nbd[has_l & ~has_u] = 1
        nbd[has_l & has_u] = 2
        nbd[~has_l & has_u] = 3
        self.nbd = nbd
        self.pairs = list(zip(lower, upper))  # fallback representation


def _drive_lbfgsb(fun_grad, x0, box: _BoxSpec, m: int, pgtol: float,
                  factr: float, maxiter: int, maxls: int = 20):
    """Minimal L-BFGS-B loop over the raw setulb routine.

    Falls back to the public interface when the private one is unavailable.
    Returns (x, iterations).
    """
    if not _HAVE_RAW_LBFGSB:
        x, _, info = fmin_l_bfgs_b(fun_grad, x0, bounds=box.pairs, m=m,
                                   pgtol=pgtol, factr=factr, maxiter=maxiter,
                                   maxls=maxls)
        return x, int(info["nit"])

    n = x0.size
    x = np.array(x0, dtype=np.float64)
    f = 0.0
    g = np.zeros(n, dtype=np.float64)
    wa = np.zeros(2 * m * n + 5 * n + 11 * m * m + 8 * m, dtype=np.float64)
    iwa = np.zeros(3 * n, dtype=np.int32)
    task = np.zeros(2, dtype=np.int32)
    ln_task = np.zeros(2, dtype=np.int32)
    lsave = np.zeros(4, dtype=np.int32)
    isave = np.zeros(44, dtype=np.int32)
    dsave = np.zeros(29, dtype=np.float64)
    nit = 0
    while True:
        _lbfgsb_raw.setulb(m, x, box.low, box.upp, box.nbd, f, g, factr,
                           pgtol, wa, iwa, task, lsave, isave, dsave,
                           maxls, ln_task)
        if task[0] == 3:          # evaluate f and g at x
            f, g = fun_grad(x)
        elif task[0] == 1:        # new iterate accepted
            nit += 1
            if nit >= maxiter:
                task[0] = 5
                task[1] = 504
        else:
            break
    return x, nit


class NlpEvaluationError(RuntimeError):
    """A callback produced a non-finite value or gradient."""


class SolveStatus(Enum):
    OPTIMAL_LOCAL = "optimal-local"
    FEASIBLE_SUBOPTIMAL = "feasible-suboptimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration-limit"


@dataclass(frozen=True)
class SolverSettings:
    feasibility_tol: float = 1e-6
    optimality_tol: float = 1e-6
    max_iterations: int = 500        # cumulative inner-iteration budget
    multistart: int = 15
    seed: int = 0
    rho0: float = 10.0               # initial penalty weight
    rho_max: float = 1e8
    rho_growth: float = 10.0
    inner_maxiter: int = 200         # cap per inner L-BFGS-B call
    lbfgs_m: int = 15
    scale_variables: bool = False    # solve in box-normalized coordinates

    def __post_init__(self):
        if self.feasibility_tol <= 0 or self.optimality_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.multistart < 1:
            raise ValueError("multistart must be at least 1")


@dataclass
class Solution:
    x: np.ndarray
    objective: float
    max_violation: float
    status: SolveStatus
    kkt_residual: float
    iterations: int
    multipliers_eq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    multipliers_ineq: np.ndarray = field(default_factory=lambda: np.zeros(0))
    start_index: int = -1

    @property
    def feasible(self) -> bool:
        return self.status in (SolveStatus.OPTIMAL_LOCAL, SolveStatus.FEASIBLE_SUBOPTIMAL)


class NlpInstance:
    """Base class: subclasses define the callbacks; fused paths are optional.

    Inequalities use the g(x) <= 0 convention. ``lower``/``upper`` are dense
    bound arrays (use +-inf for free variables).
    """

    n: int
    lower: np.ndarray
    upper: np.ndarray

    def objective(self, x: np.ndarray) -> float:
        raise NotImplementedError

    def gradient(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def eq_constraints(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(0)

    def eq_jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.zeros((0, self.n))

    def ineq_constraints(self, x: np.ndarray) -> np.ndarray:
        return np.zeros(0)

    def ineq_jacobian(self, x: np.ndarray) -> np.ndarray:
        return np.zeros((0, self.n))

    # -- composed helpers (overridden by the compiled-kernel instance) ------

    def constraints(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return self.eq_constraints(x), self.ineq_constraints(x)

    def al_value_grad(self, x, lam, mu, rho) -> tuple[float, np.ndarray]:
        f = self.objective(x)
        grad = self.gradient(x).copy()
        ceq = self.eq_constraints(x)
        val = float(f)
        if ceq.size:
            y = lam + rho * ceq
            val += float(lam @ ceq + 0.5 * rho * (ceq @ ceq))
            grad += self.eq_jacobian(x).T @ y
        gin = self.ineq_constraints(x)
        if gin.size:
            z = np.maximum(0.0, mu + rho * gin)
            val += float((z @ z - mu @ mu) / (2.0 * rho))
            grad += self.ineq_jacobian(x).T @ z
        return val, grad

    def lagrangian_grad(self, x, lam_hat, mu_hat) -> np.ndarray:
        grad = self.gradient(x).copy()
        if lam_hat.size:
            grad += self.eq_jacobian(x).T @ lam_hat
        if mu_hat.size:
            grad += self.ineq_jacobian(x).T @ mu_hat
        return grad

    def feasibility_value_grad(self, x) -> tuple[float, np.ndarray]:
        ceq = self.eq_constraints(x)
        gin = self.ineq_constraints(x)
        gplus = np.maximum(0.0, gin) if gin.size else gin
        val = float((ceq @ ceq if ceq.size else 0.0) + (gplus @ gplus if gin.size else 0.0))
        grad = np.zeros(self.n)
        if ceq.size:
            grad += 2.0 * (self.eq_jacobian(x).T @ ceq)
        if gin.size:
            grad += 2.0 * (self.ineq_jacobian(x).T @ gplus)
        return val, grad


def max_violation(ceq: np.ndarray, gin: np.ndarray) -> float:
    v = 0.0
    if ceq.size:
        v = max(v, float(np.max(np.abs(ceq))))
    if gin.size:
        v = max(v, float(np.max(gin)))
    return v


def _projected_residual(x, grad, lower, upper) -> float:
    """Infinity norm of the projected-gradient step (box KKT residual)."""
    step = np.clip(x - grad, lower, upper) - x
    return float(np.max(np.abs(step))) if step.size else 0.0


def _check_finite(val: float, grad: np.ndarray):
    if not np.isfinite(val) or not np.all(np.isfinite(grad)):
        raise NlpEvaluationError("objective or gradient returned a non-finite value")


def _variable_scale(lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Box-span scaling: solve in coordinates where every box has width ~1."""
    span = upper - lower
    span = np.where(np.isfinite(span), span, 1.0)
    return np.clip(span, 1e-2, 100.0)


def solve_single(
    inst: NlpInstance,
    x0: np.ndarray,
    settings: SolverSettings = SolverSettings(),
    lam0: np.ndarray | None = None,
    mu0: np.ndarray | None = None,
    log_path: str | None = None,
) -> Solution:
    """Augmented-Lagrangian solve from one start point."""
    lower = np.asarray(inst.lower, dtype=float)
    upper = np.asarray(inst.upper, dtype=float)
    x = np.clip(np.asarray(x0, dtype=float), lower, upper)
    scale = (_variable_scale(lower, upper) if settings.scale_variables
             else np.ones_like(lower))
    box = _BoxSpec(lower / scale, upper / scale)

    ceq, gin = inst.constraints(x)
    lam = np.zeros(ceq.size) if lam0 is None else np.asarray(lam0, dtype=float).copy()
    mu = np.zeros(gin.size) if mu0 is None else np.asarray(mu0, dtype=float).copy()

    # LANCELOT-style forcing sequences: accept a multiplier update when the
    # violation beats eta, otherwise raise the penalty. Warm multipliers let
    # the schedule start tight instead of re-learning the problem.
    warm = lam0 is not None or mu0 is not None
    rho = settings.rho0 * (100.0 if warm else 1.0)
    omega = max(settings.optimality_tol * 10.0, 1e-4) if warm else 1.0 / rho
    eta = max(settings.feasibility_tol * 100.0, 1e-4) if warm else 1.0 / rho**0.1
    used = 0
    outer = 0
    log_rows = []
    viol = max_violation(ceq, gin)
    stalls = 0

    while used < settings.max_iterations and outer < 60:
        outer += 1
        def al_fun(yy, _lam=lam, _mu=mu, _rho=rho):
            val, grad = inst.al_value_grad(yy * scale, _lam, _mu, _rho)
            _check_finite(val, grad)
            return val, grad * scale

        budget = min(settings.inner_maxiter, settings.max_iterations - used)
        x_prev = x
        y, nit = _drive_lbfgsb(
            al_fun, x / scale, box, m=settings.lbfgs_m,
            pgtol=max(omega, settings.optimality_tol * 0.1),
            factr=1e4, maxiter=budget,
        )
        x = y * scale
        used += nit
        ceq, gin = inst.constraints(x)
        viol = max_violation(ceq, gin)
        if log_path is not None:
            log_rows.append((len(log_rows), used, float(inst.objective(x)), viol,
                             float(np.linalg.norm(x - x_prev))))

        if viol <= max(eta, settings.feasibility_tol):
            lam = lam + rho * ceq
            mu = np.maximum(0.0, mu + rho * gin)
            if viol <= settings.feasibility_tol and omega <= settings.optimality_tol:
                break
            eta = max(settings.feasibility_tol * 0.1, eta / rho**0.9)
            omega = max(settings.optimality_tol, omega / rho)
        else:
            if rho >= settings.rho_max:
                stalls += 1
                if stalls >= 2:
                    break
            rho = min(rho * settings.rho_growth, settings.rho_max)
            eta = max(settings.feasibility_tol, rho**-0.1)
            omega = max(settings.optimality_tol, 1.0 / rho)

    # first-order multiplier estimates and KKT residual at the final point
    # (projected-gradient step in the scaled coordinates the inner solver saw)
    lam_hat = lam + rho * ceq
    mu_hat = np.maximum(0.0, mu + rho * gin)
    grad_l = inst.lagrangian_grad(x, lam_hat, mu_hat)
    kkt = _projected_residual(x / scale, grad_l * scale, lower / scale, upper / scale)

    if viol <= settings.feasibility_tol:
        status = (SolveStatus.OPTIMAL_LOCAL if kkt <= 10.0 * settings.optimality_tol
                  else SolveStatus.FEASIBLE_SUBOPTIMAL)
    else:
        x_rest, viol_rest, it_rest = _restore_feasibility(inst, x, settings)
        used += it_rest
        if viol_rest <= settings.feasibility_tol:
            x, viol = x_rest, viol_rest
            status = SolveStatus.FEASIBLE_SUBOPTIMAL
        elif used >= settings.max_iterations and viol_rest > settings.feasibility_tol \
                and stalls < 2:
            x, viol = (x_rest, viol_rest) if viol_rest < viol else (x, viol)
            status = SolveStatus.ITERATION_LIMIT
        else:
            x, viol = (x_rest, viol_rest) if viol_rest < viol else (x, viol)
            status = SolveStatus.INFEASIBLE

    if log_path is not None:
        with open(log_path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["iteration", "inner_iterations", "objective", "violation", "step_norm"])
            writer.writerows(log_rows)

    return Solution(
        x=np.asarray(x), objective=float(inst.objective(x)), max_violation=viol,
        status=status, kkt_residual=kkt, iterations=used,
        multipliers_eq=lam, multipliers_ineq=mu,
    )


def _restore_feasibility(inst: NlpInstance, x0: np.ndarray,
                         settings: SolverSettings) -> tuple[np.ndarray, float, int]:
    """Minimize the squared infeasibility measure to certify (in)feasibility."""
    lower = np.asarray(inst.lower, dtype=float)
    upper = np.asarray(inst.upper, dtype=float)
    scale = (_variable_scale(lower, upper) if settings.scale_variables
             else np.ones_like(lower))
    box = _BoxSpec(lower / scale, upper / scale)

    def fun(yy):
        val, grad = inst.feasibility_value_grad(yy * scale)
        _check_finite(val, grad)
        return val, grad * scale

    y, nit = _drive_lbfgsb(fun, np.clip(x0, lower, upper) / scale, box,
                           m=settings.lbfgs_m, pgtol=1e-12, factr=10.0,
                           maxiter=400)
    x = y * scale
    ceq, gin = inst.constraints(x)
    return x, max_violation(ceq, gin), int(nit)


def uniform_start(inst: NlpInstance, seed_seq: np.random.SeedSequence,
                  span_cap: float = 1e3) -> np.ndarray:
    """Uniform sample over the variable box (capped for unbounded variables)."""
    rng = np.random.default_rng(seed_seq)
    lo = np.where(np.isfinite(inst.lower), inst.lower, -span_cap)
    hi = np.where(np.isfinite(inst.upper), inst.upper, span_cap)
    return lo + rng.random(inst.n) * (hi - lo)


def multistart_points(inst: NlpInstance, settings: SolverSettings, count: int) -> list[np.ndarray]:
    """Deterministic start points; index i is stable across different counts."""
    return [
        uniform_start(inst, np.random.SeedSequence(entropy=settings.seed, spawn_key=(i,)))
        for i in range(count)
    ]


def solve_multistart(
    inst: NlpInstance,
    settings: SolverSettings = SolverSettings(),
    warm_start: np.ndarray | None = None,
    warm_multipliers: tuple[np.ndarray, np.ndarray] | None = None,
    return_all: bool = False,
):
    """Best feasible solution over the random starts (plus an optional warm one).

    With no feasible start the least-violating solution is returned with
    status INFEASIBLE.
    """
    solutions: list[Solution] = []
    if warm_start is not None:
        lam0, mu0 = warm_multipliers if warm_multipliers is not None else (None, None)
        sol = solve_single(inst, warm_start, settings, lam0=lam0, mu0=mu0)
        sol.start_index = -1
        solutions.append(sol)
    for i, x0 in enumerate(multistart_points(inst, settings, settings.multistart)):
        sol = solve_single(inst, x0, settings)
        sol.start_index = i
        solutions.append(sol)

    best = best_solution(solutions)
    if return_all:
        return best, solutions
    return best


def best_solution(solutions: list[Solution]) -> Solution:
    feasible = [s for s in solutions if s.feasible]
    if feasible:
        return min(feasible, key=lambda s: s.objective)
    nearly = min(solutions, key=lambda s: s.max_violation)
    return replace_status(nearly, SolveStatus.INFEASIBLE)


def replace_status(sol: Solution, status: SolveStatus) -> Solution:
    return replace(sol, status=status)
