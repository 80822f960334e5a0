"""Slack-free augmented Lagrangian for constrained binary problems.

For ``min f(x)  s.t.  g_k(x) <= 0,  h_k(x) = 0`` each outer iteration
minimizes::

    F(x) = f(x) + sum_k [lam_k (g_k(x) + v_k) + mu/2 (g_k(x) + v_k)^2]
                + sum_k [lam_k h_k(x) + mu/2 h_k(x)^2]

with the slacks ``v_k`` held fixed, then sets
``v_k = max(0, -(g_k(x) + lam_k/mu))``, ``lam_k = max(0, lam_k + mu g_k(x))``
(``lam_k += mu h_k(x)`` for equalities) and ``mu *= rho``. The closed-form
slack removes the need to encode a continuous slack in extra bits.
"""
from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from .hobo import HoboConfig, QuadraticFormComposite, derive_seed, minimize_hobo
from .model import Assignment, BinaryPolynomial, VariableDomain, as_point, taylor_from_derivatives
from .quadratize import project_assignment, quadratize
from .solvers import SaConfig, solve_quadratic

__all__ = [
    "ConstrainedProblem",
    "AlmConfig",
    "AlmState",
    "AlmIterate",
    "AlmResult",
    "PenaltyConfig",
    "MaxSquarePenalty",
    "build_augmented_lagrangian",
    "solve_alm",
    "solve_penalty",
    "slack_update",
    "multiplier_update",
    "normalized_problem",
    "variation_bound",
]


def _constant_of(p) -> float:
    return float(p.constant)


@dataclass
class ConstrainedProblem:
    objective: object
    inequalities: list = field(default_factory=list)
    equalities: list = field(default_factory=list)

    def __post_init__(self):
        self.inequalities = list(self.inequalities)
        self.equalities = list(self.equalities)
        for p in self.inequalities + self.equalities:
            if p.num_vars != self.objective.num_vars:
                raise ValueError("all polynomials must share num_vars")
            if p.domain is not self.objective.domain:
                raise ValueError("all polynomials must share the variable domain")

    @property
    def num_vars(self) -> int:
        return self.objective.num_vars

    @property
    def domain(self) -> VariableDomain:
        return self.objective.domain

    def violations(self, x) -> tuple[np.ndarray, np.ndarray]:
        g = np.array([p.value(x) for p in self.inequalities])
        h = np.array([p.value(x) for p in self.equalities])
        return g, h

    def scales(self) -> tuple[np.ndarray, np.ndarray]:
        g = np.array([max(1.0, abs(_constant_of(p))) for p in self.inequalities])
        h = np.array([max(1.0, abs(_constant_of(p))) for p in self.equalities])
        return g, h

    def is_feasible(self, x, tol: float = 1e-6) -> bool:
        g, h = self.violations(x)
        sg, sh = self.scales()
        return bool(np.all(g <= tol * sg) and np.all(np.abs(h) <= tol * sh))


@dataclass
class AlmConfig:
    lambda0: float = 3.0
    mu0: float = 5.5
    rho: float = 1.1
    min_iters: int = 10
    max_iters: int = 50
    stall_iters: int = 5
    feasibility_tol: float = 1e-6
    inner: HoboConfig = field(default_factory=lambda: HoboConfig(repair_always=True))
    inner_method: str = "taylor"
    quad_solver: str = "sa"
    quad_solver_config: object = None
    normalize: bool = True
    inner_starts: int = 4
    seed: int = 0

    def __post_init__(self):
        if not self.mu0 > 0:
            raise ValueError("mu0 must be positive")
        if not self.rho > 1:
            raise ValueError("rho must exceed 1")
        if not (1 <= self.min_iters <= self.max_iters):
            raise ValueError("need 1 <= min_iters <= max_iters")
        if self.stall_iters < 1:
            raise ValueError("stall_iters must be >= 1")
        if self.inner_starts < 1:
            raise ValueError("inner_starts must be >= 1")
        if self.inner_method not in ("taylor", "quadratize"):
            raise ValueError("inner_method must be 'taylor' or 'quadratize'")


@dataclass
class AlmState:
    lambdas: np.ndarray
    mu: float
    v: np.ndarray
    n_ineq: int = 0
    best_feasible: tuple | None = None
    iteration: int = 0

    @classmethod
    def initial(cls, problem: ConstrainedProblem, cfg: AlmConfig) -> "AlmState":
        n_ineq, n_eq = len(problem.inequalities), len(problem.equalities)
        lam = np.full(n_ineq + n_eq, float(cfg.lambda0))
        lam[:n_ineq] = max(0.0, cfg.lambda0)
        return cls(lam, float(cfg.mu0), np.zeros(n_ineq), n_ineq)

    @property
    def ineq_lambdas(self) -> np.ndarray:
        return self.lambdas[: self.n_ineq]

    @property
    def eq_lambdas(self) -> np.ndarray:
        return self.lambdas[self.n_ineq:]


def slack_update(g: np.ndarray, lam: np.ndarray, mu: float) -> np.ndarray:
    return np.maximum(0.0, -(np.asarray(g) + np.asarray(lam) / mu))


def multiplier_update(g: np.ndarray, lam: np.ndarray, mu: float) -> np.ndarray:
    return np.maximum(0.0, np.asarray(lam) + mu * np.asarray(g))


def _as_polynomial(p) -> BinaryPolynomial:
    return p if isinstance(p, BinaryPolynomial) else p.to_polynomial()


def _plain_quadform(p) -> bool:
    return isinstance(p, QuadraticFormComposite) and p.is_quadratic


def build_augmented_lagrangian(p: ConstrainedProblem, s: AlmState):
    """Augmented Lagrangian at the state's multipliers, penalty and slacks.

    A quadratic-form objective with one quadratic-form inequality yields a
    :class:`QuadraticFormComposite`; anything else is expanded into a
    :class:`BinaryPolynomial`.
    """
    if len(s.v) != len(p.inequalities) or len(s.lambdas) != len(p.inequalities) + len(p.equalities):
        raise ValueError("state dimensions do not match the problem")
    mu = s.mu
    if (
        _plain_quadform(p.objective)
        and len(p.inequalities) == 1
        and not p.equalities
        and _plain_quadform(p.inequalities[0])
    ):
        f, g = p.objective, p.inequalities[0]
        lam, v = s.lambdas[0], s.v[0]
        shift = g.constant + v
        a = f.a_coef * f.a_matrix + (lam + mu * shift) * g.a_coef * g.a_matrix
        constant = f.constant + lam * shift + 0.5 * mu * shift * shift
        return QuadraticFormComposite(a, 1.0, g.a_matrix, 0.5 * mu * g.a_coef**2, constant)

    F = _as_polynomial(p.objective)
    for g, lam, v in zip(p.inequalities, s.ineq_lambdas, s.v):
        gv = _as_polynomial(g) + float(v)
        F = F + gv * float(lam) + (gv * gv) * (0.5 * mu)
    for h, lam in zip(p.equalities, s.eq_lambdas):
        hp = _as_polynomial(h)
        F = F + hp * float(lam) + (hp * hp) * (0.5 * mu)
    return F


@dataclass
class AlmIterate:
    iteration: int
    lambdas: list[float]
    mu: float
    v: list[float]
    g_values: list[float]
    objective: float
    feasible: bool
    best_so_far: float

    header = ["iter", "lambda", "mu", "v", "g_value", "objective", "feasible", "best_so_far"]

    def row(self) -> list:
        join = lambda xs: ";".join(repr(float(x)) for x in xs)
        return [self.iteration, join(self.lambdas), repr(self.mu), join(self.v), join(self.g_values),
                repr(self.objective), int(self.feasible), repr(self.best_so_far)]


@dataclass
class AlmResult:
    assignment: Assignment | None
    objective: float
    feasible: bool
    min_violation: float
    trace: list[AlmIterate]
    state: AlmState | None = None
    iterates: list[np.ndarray] = field(default_factory=list)

    @property
    def outer_iters(self) -> int:
        return len(self.trace)


def _inner_solve(F, x_start: np.ndarray, cfg: AlmConfig, iteration: int) -> np.ndarray:
    seed = derive_seed(cfg.seed, "alm", iteration)
    if cfg.inner_method == "taylor":
        # warm start from the previous iterate plus optional random restarts
        best_x, best_val = None, math.inf
        for k in range(cfg.inner_starts):
            start = x_start if k == 0 else None
            inner = dataclasses.replace(cfg.inner, initial_point=start, seed=derive_seed(seed, k))
            res = minimize_hobo(F, inner)
            if res.value < best_val:
                best_x, best_val = res.best.values, res.value
        return best_x
    poly = _as_polynomial(F)
    q = quadratize(poly)
    solver_cfg = cfg.quad_solver_config or (SaConfig() if cfg.quad_solver == "sa" else None)
    if solver_cfg is not None:
        solver_cfg = dataclasses.replace(solver_cfg, seed=seed)
    res = solve_quadratic(q.quadratic, cfg.quad_solver, solver_cfg)
    return project_assignment(q, res.assignment).values


def variation_bound(p) -> float:
    """Upper bound on ``|p(x) - p.constant|`` over Ising or Boolean points."""
    if isinstance(p, QuadraticFormComposite):
        off = lambda m: float(np.abs(m).sum() - np.abs(np.diag(m)).sum())
        bound = abs(p.a_coef) * off(p.a_matrix)
        if not p.is_quadratic:
            bound += abs(p.b_coef) * float(np.abs(p.b_matrix).sum()) ** 2
        return bound
    return float(sum(abs(c) for c in p.terms.values()))


def _rescaled(p, factor: float):
    if isinstance(p, QuadraticFormComposite):
        return QuadraticFormComposite(p.a_matrix, p.a_coef * factor, p.b_matrix, p.b_coef * factor, p.constant * factor)
    return p * factor


def normalized_problem(p: ConstrainedProblem) -> ConstrainedProblem:
    """Divide the objective and every constraint by its variation bound."""
    unit = lambda q: _rescaled(q, 1.0 / (variation_bound(q) or 1.0))
    return ConstrainedProblem(unit(p.objective), [unit(g) for g in p.inequalities], [unit(h) for h in p.equalities])


def _max_violation(g: np.ndarray, h: np.ndarray) -> float:
    return float(max(np.max(g, initial=-np.inf), np.max(np.abs(h), initial=-np.inf), 0.0))


def solve_alm(p: ConstrainedProblem, cfg: AlmConfig | None = None) -> AlmResult:
    """Modified augmented Lagrangian with closed-form slacks.

    Every outer iterate is checked against the original constraints; the
    best feasible one (by true objective) is returned. Stops at ``max_iters``
    or, after ``min_iters``, once the best feasible objective has not
    improved for ``stall_iters`` iterations.

    With ``cfg.normalize`` the multipliers and penalty act on the problem
    rescaled by :func:`normalized_problem`, so the defaults do not depend on
    the units of the data; feasibility and objectives are reported in the
    original units.
    """
    cfg = cfg or AlmConfig()
    work = normalized_problem(p) if cfg.normalize else p
    state = AlmState.initial(work, cfg)
    inner = cfg.inner
    if inner.initial_point is not None:
        x = as_point(inner.initial_point, p.domain, p.num_vars).copy()
    else:
        lo, hi = p.domain.values
        rng = np.random.default_rng(derive_seed(cfg.seed, "alm-init"))
        x = np.where(rng.random(p.num_vars) < 0.5, lo, hi).astype(np.int64)

    sg, sh = p.scales()
    best_x, best_f = None, math.inf
    least_viol, least_viol_x = math.inf, None
    trace: list[AlmIterate] = []
    iterates = []
    stall = 0
    for it in range(cfg.max_iters):
        state.iteration = it
        F = build_augmented_lagrangian(work, state)
        x = _inner_solve(F, x, cfg, it)
        iterates.append(x.copy())
        g, h = p.violations(x)
        wg, wh = work.violations(x) if cfg.normalize else (g, h)
        fx = p.objective.value(x)
        feasible = bool(np.all(g <= cfg.feasibility_tol * sg) and np.all(np.abs(h) <= cfg.feasibility_tol * sh))
        viol = _max_violation(g, h)
        if viol < least_viol:
            least_viol, least_viol_x = viol, x.copy()
        if feasible and fx < best_f:
            best_x, best_f = x.copy(), fx
            state.best_feasible = (Assignment(p.domain, best_x), best_f)
            stall = 0
        elif best_x is not None:
            stall += 1
        trace.append(AlmIterate(it, state.lambdas.tolist(), state.mu, state.v.tolist(),
                                np.concatenate([g, h]).tolist(), fx, feasible, best_f))

        lam_g = state.ineq_lambdas
        new_v = slack_update(wg, lam_g, state.mu)
        new_lam_g = multiplier_update(wg, lam_g, state.mu)
        new_lam_h = state.eq_lambdas + state.mu * wh
        state.v = new_v
        state.lambdas = np.concatenate([new_lam_g, new_lam_h])
        state.mu *= cfg.rho
        if it + 1 >= cfg.min_iters and stall >= cfg.stall_iters:
            break

    if best_x is None:
        point = None if least_viol_x is None else Assignment(p.domain, least_viol_x)
        obj = math.nan if least_viol_x is None else p.objective.value(least_viol_x)
        return AlmResult(point, obj, False, least_viol, trace, state, iterates)
    return AlmResult(Assignment(p.domain, best_x), best_f, True, 0.0, trace, state, iterates)


# ---------------------------------------------------------------------------
# penalty baseline


class MaxSquarePenalty:
    """``f(x) + weight * max(g(x), 0)**2``.

    Value, gradient and Hessian use ``u = max(g, 0)`` evaluated at the point;
    the max-square term contributes ``2 w u grad g`` and
    ``2 w (grad g grad g^T + u hess g)`` when ``g > 0`` and nothing otherwise.
    """

    def __init__(self, objective, constraint, weight: float):
        self.objective = objective
        self.constraint = constraint
        self.weight = float(weight)
        self.num_vars = objective.num_vars
        self.domain = objective.domain

    def value(self, point) -> float:
        u = max(self.constraint.value(point), 0.0)
        return self.objective.value(point) + self.weight * u * u

    def values(self, X) -> np.ndarray:
        u = np.maximum(self.constraint.values(X), 0.0)
        return self.objective.values(X) + self.weight * u * u

    def gradient_hessian(self, point):
        grad, hess = self.objective.gradient_hessian(point)
        u = self.constraint.value(point)
        if u > 0:
            gg, gh = self.constraint.gradient_hessian(point)
            grad = grad + 2.0 * self.weight * u * gg
            hess = hess + 2.0 * self.weight * (np.outer(gg, gg) + u * gh)
            np.fill_diagonal(hess, 0.0)
        return grad, hess

    def taylor_quadratic(self, point) -> BinaryPolynomial:
        x0 = as_point(point, self.domain, self.num_vars)
        grad, hess = self.gradient_hessian(x0)
        return taylor_from_derivatives(self.value(x0), grad, hess, x0, self.domain)


@dataclass
class PenaltyConfig:
    lambda0: float = 1.0
    growth: float = 10.0
    max_rounds: int = 8
    feasibility_tol: float = 1e-6
    inner: HoboConfig = field(default_factory=lambda: HoboConfig(solver="sa"))
    normalize: bool = True
    seed: int = 0

    def __post_init__(self):
        if not self.lambda0 > 0 or not self.growth > 1 or self.max_rounds < 1:
            raise ValueError("need lambda0 > 0, growth > 1, max_rounds >= 1")


def solve_penalty(p: ConstrainedProblem, cfg: PenaltyConfig | None = None) -> AlmResult:
    """Minimize ``f + lam * max(g, 0)^2``, multiplying ``lam`` by ``growth`` until feasible.

    ``cfg.normalize`` applies the same rescaling as :func:`solve_alm`.
    """
    cfg = cfg or PenaltyConfig()
    if len(p.inequalities) != 1 or p.equalities:
        raise ValueError("the penalty baseline handles exactly one inequality")
    g = p.inequalities[0]
    scale = max(1.0, abs(_constant_of(g)))
    work = normalized_problem(p) if cfg.normalize else p
    x = None if cfg.inner.initial_point is None else as_point(cfg.inner.initial_point, p.domain, p.num_vars)
    weight = cfg.lambda0
    trace: list[AlmIterate] = []
    best_x, best_f = None, math.inf
    least_viol, least_viol_x = math.inf, None
    for r in range(cfg.max_rounds):
        obj = MaxSquarePenalty(work.objective, work.inequalities[0], weight)
        inner = dataclasses.replace(cfg.inner, initial_point=x, seed=derive_seed(cfg.seed, "penalty", r))
        x = minimize_hobo(obj, inner).best.values
        gv = g.value(x)
        fx = p.objective.value(x)
        feasible = gv <= cfg.feasibility_tol * scale
        if feasible and fx < best_f:
            best_x, best_f = x.copy(), fx
        if max(gv, 0.0) < least_viol:
            least_viol, least_viol_x = max(gv, 0.0), x.copy()
        trace.append(AlmIterate(r, [weight], 0.0, [], [gv], fx, bool(feasible), best_f))
        if feasible:
            break
        weight *= cfg.growth
    if best_x is None:
        return AlmResult(Assignment(p.domain, least_viol_x), p.objective.value(least_viol_x), False, least_viol, trace)
    return AlmResult(Assignment(p.domain, best_x), best_f, True, 0.0, trace)
