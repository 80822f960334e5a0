"""Unconstrained higher-order binary minimization through quadratic surrogates.

Each iteration expands the objective to second order around the current
point, hands the resulting QUBO/Ising model to a solver, and repairs the
answer with greedy bit flips whenever it is worse than the expansion point.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass, field

import numpy as np

from .model import Assignment, BinaryPolynomial, VariableDomain, as_point, taylor_from_derivatives
from .solvers import DsbConfig, SaConfig, greedy_bit_flip, restart_rng, solve_quadratic

__all__ = ["QuadraticFormComposite", "HoboConfig", "HoboIteration", "HoboTrace", "HoboResult", "minimize_hobo", "derive_seed"]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from arbitrary printable parts."""
    digest = hashlib.blake2b("|".join(map(str, parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def _sym(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _quadform_polynomial(M: np.ndarray) -> BinaryPolynomial:
    n = M.shape[0]
    rows, cols = np.triu_indices(n, 1)
    terms = {(i, j): 2.0 * M[i, j] for i, j in zip(rows.tolist(), cols.tolist())}
    return BinaryPolynomial(n, VariableDomain.ISING, terms, float(np.trace(M)))


class QuadraticFormComposite:
    """``c1 * x^T A x + c2 * (x^T B x)**2 + constant`` over Ising spins.

    Gradient and Hessian are those of the real function (diagonal of the
    Hessian dropped), which avoids expanding the O(N^4) monomials of the
    squared form.
    """

    domain = VariableDomain.ISING

    def __init__(self, a_matrix, a_coef: float = 1.0, b_matrix=None, b_coef: float = 0.0, constant: float = 0.0):
        self.a_matrix = _sym(a_matrix)
        self.a_coef = float(a_coef)
        self.b_matrix = None if b_matrix is None else _sym(b_matrix)
        self.b_coef = float(b_coef) if b_matrix is not None else 0.0
        self.constant = float(constant)
        n = self.a_matrix.shape[0]
        if self.b_matrix is not None and self.b_matrix.shape != (n, n):
            raise ValueError("A and B must have the same shape")
        self.num_vars = n

    def __repr__(self) -> str:
        return (
            f"QuadraticFormComposite(n={self.num_vars}, a_coef={self.a_coef:g}, "
            f"b_coef={self.b_coef:g}, constant={self.constant:g})"
        )

    @property
    def is_quadratic(self) -> bool:
        return self.b_matrix is None or self.b_coef == 0.0

    def _forms(self, x):
        pa = x @ self.a_matrix @ x
        pb = 0.0 if self.is_quadratic else x @ self.b_matrix @ x
        return pa, pb

    def value(self, point) -> float:
        x = as_point(point, self.domain, self.num_vars).astype(float)
        pa, pb = self._forms(x)
        return float(self.a_coef * pa + self.b_coef * pb * pb + self.constant)

    def values(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        out = self.a_coef * np.einsum("mi,ij,mj->m", X, self.a_matrix, X) + self.constant
        if not self.is_quadratic:
            pb = np.einsum("mi,ij,mj->m", X, self.b_matrix, X)
            out = out + self.b_coef * pb * pb
        return out

    def gradient_hessian(self, point) -> tuple[np.ndarray, np.ndarray]:
        x = as_point(point, self.domain, self.num_vars).astype(float)
        grad = 2.0 * self.a_coef * (self.a_matrix @ x)
        hess = 2.0 * self.a_coef * self.a_matrix
        if not self.is_quadratic:
            bx = self.b_matrix @ x
            pb = x @ bx
            grad = grad + 4.0 * self.b_coef * pb * bx
            hess = hess + 8.0 * self.b_coef * np.outer(bx, bx) + 4.0 * self.b_coef * pb * self.b_matrix
        hess = hess.copy()
        np.fill_diagonal(hess, 0.0)
        return grad, hess

    def taylor_quadratic(self, point) -> BinaryPolynomial:
        x0 = as_point(point, self.domain, self.num_vars)
        if self.is_quadratic:
            return self.to_polynomial()
        grad, hess = self.gradient_hessian(x0)
        return taylor_from_derivatives(self.value(x0), grad, hess, x0, self.domain)

    def to_polynomial(self) -> BinaryPolynomial:
        """Canonical Ising polynomial (quartic when the squared form is present)."""
        poly = _quadform_polynomial(self.a_matrix) * self.a_coef + self.constant
        if not self.is_quadratic:
            pb = _quadform_polynomial(self.b_matrix)
            poly = poly + (pb * pb) * self.b_coef
        return poly

    def flip_values(self, point) -> np.ndarray:
        x = as_point(point, self.domain, self.num_vars).astype(float)
        pa, pb = self._forms(x)
        pa_f = pa - 4.0 * x * (self.a_matrix @ x) + 4.0 * np.diag(self.a_matrix)
        out = self.a_coef * pa_f + self.constant
        if not self.is_quadratic:
            pb_f = pb - 4.0 * x * (self.b_matrix @ x) + 4.0 * np.diag(self.b_matrix)
            out = out + self.b_coef * pb_f * pb_f
        return out

    def greedy_bit_flip(self, start) -> Assignment:
        """Same acceptance rule as :func:`solvers.greedy_bit_flip`, with O(N) flip updates."""
        x = as_point(start, self.domain, self.num_vars).astype(float)
        A = self.a_matrix
        B = self.b_matrix if not self.is_quadratic else np.zeros_like(A)
        dA, dB = np.diag(A), np.diag(B)
        u, w = A @ x, B @ x
        pa, pb = x @ u, x @ w
        f = self.a_coef * pa + self.b_coef * pb * pb + self.constant
        n = self.num_vars
        for _ in range(max(n, 1)):
            changed = False
            for i in range(n):
                xi = x[i]
                pa_i = pa - 4.0 * xi * u[i] + 4.0 * dA[i]
                pb_i = pb - 4.0 * xi * w[i] + 4.0 * dB[i]
                f_i = self.a_coef * pa_i + self.b_coef * pb_i * pb_i + self.constant
                if f_i < f:
                    u -= 2.0 * xi * A[:, i]
                    w -= 2.0 * xi * B[:, i]
                    x[i] = -xi
                    pa, pb, f = pa_i, pb_i, f_i
                    changed = True
            if not changed:
                break
        return Assignment(self.domain, x.astype(np.int64))


@dataclass
class HoboConfig:
    max_iters: int = 30
    stall_limit: int = 3
    solver: str = "dsb"
    solver_config: DsbConfig | SaConfig | None = None
    initial_point: object = None
    seed: int = 0
    repair_always: bool = False

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stall_limit < 1:
            raise ValueError("stall_limit must be >= 1")


@dataclass
class HoboIteration:
    iteration: int
    surrogate_value: float
    true_value: float
    best_so_far: float


@dataclass
class HoboTrace:
    iterations: list[HoboIteration] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.iterations)

    @property
    def best_so_far(self) -> list[float]:
        return [it.best_so_far for it in self.iterations]

    def rows(self) -> list[list]:
        return [[it.iteration, it.surrogate_value, it.true_value, it.best_so_far] for it in self.iterations]

    header = ["iter", "surrogate_value", "true_value", "best_so_far"]


@dataclass
class HoboResult:
    best: Assignment
    value: float
    trace: HoboTrace
    initial_value: float


def _initial_point(f, cfg: HoboConfig) -> np.ndarray:
    if cfg.initial_point is not None:
        return as_point(cfg.initial_point, f.domain, f.num_vars).copy()
    lo, hi = f.domain.values
    rng = restart_rng(cfg.seed, 0)
    return np.where(rng.random(f.num_vars) < 0.5, lo, hi).astype(np.int64)


def _solver_config(cfg: HoboConfig, iteration: int):
    seed = derive_seed(cfg.seed, "hobo", iteration)
    if cfg.solver == "exhaustive":
        return None
    base = cfg.solver_config
    if base is None:
        base = DsbConfig() if cfg.solver == "dsb" else SaConfig()
    return dataclasses.replace(base, seed=seed)


def minimize_hobo(f, cfg: HoboConfig | None = None) -> HoboResult:
    """Minimize ``f`` (a :class:`BinaryPolynomial` or structured objective).

    Loop: surrogate at ``x0`` -> QUBO solve -> greedy repair if the true value
    got worse -> ``x0`` <- candidate. Stops when the candidate equals ``x0``,
    after ``stall_limit`` iterations without a new best, or at ``max_iters``.
    Returns the best point seen (never worse than the initial point).
    """
    cfg = cfg or HoboConfig()
    x0 = _initial_point(f, cfg)
    f0 = f.value(x0)
    best_x, best_f = x0.copy(), f0
    initial_value = f0
    exact = isinstance(f, BinaryPolynomial) and f.degree <= 2
    trace = HoboTrace()
    stall = 0
    for it in range(cfg.max_iters):
        surrogate = f.taylor_quadratic(x0)
        res = solve_quadratic(surrogate, cfg.solver, _solver_config(cfg, it))
        x = res.assignment.values
        surrogate_value = res.energy
        fx = f.value(x)
        if fx > f0 or cfg.repair_always:
            x = greedy_bit_flip(f, x).values
            fx = f.value(x)
        if fx < best_f:
            best_x, best_f = x.copy(), fx
            stall = 0
        else:
            stall += 1
        trace.iterations.append(HoboIteration(it, surrogate_value, fx, best_f))
        fixed_point = np.array_equal(x, x0)
        x0, f0 = x, fx
        if exact or fixed_point or stall >= cfg.stall_limit:
            break
    return HoboResult(Assignment(f.domain, best_x), best_f, trace, initial_value)
