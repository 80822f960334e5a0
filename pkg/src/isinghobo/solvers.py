"""Ising/QUBO solvers.

* :func:`solve_dsb` -- discrete simulated bifurcation (symplectic Euler, sign-
  discretized couplings, wall at ``|x| = 1``).
* :func:`solve_sa` -- Metropolis single-spin-flip simulated annealing.
* :func:`solve_exhaustive` -- exact enumeration; Gray-code order with O(N)
  incremental updates for quadratic models.
* :func:`greedy_bit_flip` -- 1-opt descent on any objective.
* :func:`random_search` -- best of i.i.d. uniform samples.

Restart ``r`` of a run seeded with ``seed`` draws from
``SeedSequence([seed, r])`` so results never depend on how restarts are
scheduled.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numba
import numpy as np

from .model import (
    Assignment,
    BinaryPolynomial,
    IsingModel,
    QuboModel,
    VariableDomain,
    absorb_linear_terms,
    as_point,
    boolean_to_ising,
    to_solver_model,
)

log = logging.getLogger(__name__)

EXHAUSTIVE_CAP = 26
_SEED_MASK = (1 << 64) - 1


def restart_rng(seed: int, restart: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed) & _SEED_MASK, int(restart)]))


@dataclass
class SolveResult:
    assignment: Assignment | None
    energy: float
    restart_index: int = 0
    wall_time: float = 0.0
    feasible: bool = True
    diagnostics: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "energy": self.energy,
            "assignment": None if self.assignment is None else self.assignment.values.tolist(),
            "wall_ms": 1e3 * self.wall_time,
            "restart_index": self.restart_index,
            "feasible": self.feasible,
        }


# ---------------------------------------------------------------------------
# discrete simulated bifurcation


@dataclass
class DsbConfig:
    steps: int = 1000
    dt: float = 0.5
    b0: float = 1.0
    xi0: float | str = "auto"
    schedule: str = "linear"
    restarts: int = 4
    seed: int = 0

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.b0 > 0:
            raise ValueError("b0 must be positive")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.schedule != "linear":
            raise ValueError("only the linear 0 -> b0 schedule is supported")
        if isinstance(self.xi0, str):
            if self.xi0 != "auto":
                self.xi0 = float(self.xi0)
        if not isinstance(self.xi0, str) and not self.xi0 > 0:
            raise ValueError("xi0 must be positive or 'auto'")


def resolve_xi0(cfg: DsbConfig, model: IsingModel) -> float:
    """``0.5 * b0 / (sigma_J * sqrt(N))``; ``b0`` when there are no couplings.

    ``sigma_J`` is the root-mean-square of the nonzero couplings (their spread
    about zero), which stays positive for uniform-magnitude instances.
    """
    if not isinstance(cfg.xi0, str):
        return float(cfg.xi0)
    couplings = model.j[np.tril_indices(model.num_vars, -1)]
    couplings = couplings[couplings != 0]
    sigma = float(np.sqrt(np.mean(couplings**2))) if couplings.size else 0.0
    if sigma == 0.0:
        return cfg.b0
    return 0.5 * cfg.b0 / (sigma * math.sqrt(model.num_vars))


def _sign(x: np.ndarray) -> np.ndarray:
    return np.where(x >= 0, 1.0, -1.0)


def solve_dsb(model: IsingModel, cfg: DsbConfig | None = None) -> SolveResult:
    """Minimize an Ising energy with discrete simulated bifurcation.

    Per step: ``y += dt * (-(b0 - b(t_k)) x - xi0 * K sign(x))`` with
    ``K = J + J^T``, then ``x += b0 * dt * y``; components with ``|x| > 1`` are
    reset to ``sign(x)`` with zero momentum. ``b`` rises linearly from 0 to
    ``b0``. The lowest-energy sign vector seen at any step of any restart is
    returned.
    """
    cfg = cfg or DsbConfig()
    if model.num_vars == 0:
        raise ValueError("empty model")
    t0 = time.perf_counter()
    work, ancilla = model, None
    if np.any(model.a != 0):
        work, ancilla = absorb_linear_terms(model)
    n = work.num_vars
    K = work.symmetric
    xi0 = resolve_xi0(cfg, work)
    b0, dt = cfg.b0, cfg.dt

    R = cfg.restarts
    X = np.empty((R, n))
    Y = np.empty((R, n))
    for r in range(R):
        rng = restart_rng(cfg.seed, r)
        X[r] = rng.uniform(-0.1, 0.1, n)
        Y[r] = rng.uniform(-0.1, 0.1, n)

    best_e = np.full(R, np.inf)
    best_s = np.ones((R, n))
    for k in range(cfg.steps + 1):
        S = _sign(X)
        F = S @ K
        E = 0.5 * np.einsum("ri,ri->r", S, F)
        better = E < best_e
        if better.any():
            best_e[better] = E[better]
            best_s[better] = S[better]
        if k == cfg.steps:
            break
        b = b0 * k / cfg.steps
        Y += dt * (-(b0 - b) * X - xi0 * F)
        X += b0 * dt * Y
        wall = np.abs(X) > 1.0
        if wall.any():
            X[wall] = np.sign(X[wall])
            Y[wall] = 0.0

    diagnostics = []
    alive = np.isfinite(X).all(axis=1) & np.isfinite(Y).all(axis=1) & np.isfinite(best_e)
    for r in np.flatnonzero(~alive):
        msg = f"restart {r}: non-finite dynamics, discarded"
        log.warning(msg)
        diagnostics.append(msg)
    if not alive.any():
        raise FloatingPointError("all dSB restarts produced non-finite dynamics")
    best_e[~alive] = np.inf
    r_best = int(np.argmin(best_e))
    s = best_s[r_best].astype(np.int64)
    if ancilla is not None:
        if s[ancilla] < 0:
            s = -s
        s = np.delete(s, ancilla)
    point = Assignment(VariableDomain.ISING, s)
    return SolveResult(point, model.energy(s), r_best, time.perf_counter() - t0, True, diagnostics)


# ---------------------------------------------------------------------------
# simulated annealing


@dataclass
class SaConfig:
    sweeps: int = 1000
    restarts: int = 4
    seed: int = 0
    t_hot: float | None = None
    t_cold: float | None = None

    def __post_init__(self):
        if self.sweeps < 1 or self.restarts < 1:
            raise ValueError("sweeps and restarts must be >= 1")
        for t in (self.t_hot, self.t_cold):
            if t is not None and not t > 0:
                raise ValueError("temperatures must be positive")


@numba.njit(cache=True)
def _sa_kernel(K, a, s0, betas, seed):
    np.random.seed(seed)
    n = s0.shape[0]
    s = s0.copy()
    h = K @ s + a
    e = 0.5 * (s @ (K @ s)) + a @ s
    best = e
    best_s = s.copy()
    for beta in betas:
        for i in range(n):
            de = -2.0 * s[i] * h[i]
            if de <= 0.0 or np.random.random() < math.exp(-beta * de):
                s[i] = -s[i]
                step = 2.0 * s[i]
                for k in range(n):
                    h[k] += step * K[k, i]
                e += de
                if e < best:
                    best = e
                    best_s[:] = s
    return best_s, best


def _sa_betas(K: np.ndarray, a: np.ndarray, cfg: SaConfig) -> np.ndarray:
    field_bound = 2.0 * (np.abs(K).sum(axis=1) + np.abs(a))
    mags = np.concatenate([np.abs(K[K != 0]), np.abs(a[a != 0])])
    if mags.size == 0:
        return np.ones(cfg.sweeps)
    t_hot = cfg.t_hot or float(field_bound.max()) / math.log(2.0)
    t_cold = cfg.t_cold or 2.0 * float(mags.min()) / math.log(100.0)
    t_cold = min(t_cold, t_hot)
    return 1.0 / np.geomspace(t_hot, t_cold, cfg.sweeps)


def solve_sa(model: IsingModel, cfg: SaConfig | None = None) -> SolveResult:
    """Metropolis annealing with a geometric temperature schedule.

    Default temperatures follow the usual heuristic: the hot end accepts the
    worst single flip with probability 1/2, the cold end accepts the smallest
    uphill move with probability 1/100.
    """
    cfg = cfg or SaConfig()
    if model.num_vars == 0:
        raise ValueError("empty model")
    t0 = time.perf_counter()
    K = np.ascontiguousarray(model.symmetric)
    a = np.ascontiguousarray(model.a, dtype=float)
    betas = _sa_betas(K, a, cfg)
    best_e, best_s, best_r = np.inf, None, 0
    for r in range(cfg.restarts):
        rng = restart_rng(cfg.seed, r)
        s0 = rng.choice(np.array([-1.0, 1.0]), size=model.num_vars)
        s, e = _sa_kernel(K, a, s0, betas, int(rng.integers(0, 2**31 - 1)))
        if e < best_e:
            best_e, best_s, best_r = e, s, r
    s = best_s.astype(np.int64)
    return SolveResult(Assignment(VariableDomain.ISING, s), model.energy(s), best_r, time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# exhaustive search


@numba.njit(cache=True)
def _gray_quadform(A, B, threshold, constrained):
    """Minimize x^T A x over spins with x_0 = +1, optionally s.t. x^T B x >= threshold.

    Returns (best value, best Gray index, found, max x^T B x, its Gray index).
    """
    n = A.shape[0]
    x = np.ones(n)
    u = A @ x
    w = B @ x
    pa = x @ u
    pb = x @ w
    best = np.inf
    best_k = -1
    max_pb = pb
    max_k = 0
    if (not constrained) or pb >= threshold:
        best = pa
        best_k = 0
    total = 1 << (n - 1)
    for k in range(1, total):
        bit = 0
        kk = k
        while (kk & 1) == 0:
            kk >>= 1
            bit += 1
        i = bit + 1
        xi = x[i]
        pa += -4.0 * xi * u[i] + 4.0 * A[i, i]
        pb += -4.0 * xi * w[i] + 4.0 * B[i, i]
        for m in range(n):
            u[m] -= 2.0 * xi * A[m, i]
            w[m] -= 2.0 * xi * B[m, i]
        x[i] = -xi
        if pb > max_pb:
            max_pb = pb
            max_k = k
        if constrained and pb < threshold:
            continue
        if pa < best:
            best = pa
            best_k = k
    return best, best_k, best_k >= 0, max_pb, max_k


@numba.njit(cache=True)
def _gray_ising(K, a):
    """Minimize 0.5 s^T K s + a^T s over all spins (K symmetric, zero diagonal)."""
    n = K.shape[0]
    s = np.ones(n)
    h = K @ s + a
    e = 0.5 * (s @ (K @ s)) + a @ s
    best = e
    best_k = 0
    total = 1 << n
    for k in range(1, total):
        i = 0
        kk = k
        while (kk & 1) == 0:
            kk >>= 1
            i += 1
        e += -2.0 * s[i] * h[i]
        s[i] = -s[i]
        step = 2.0 * s[i]
        for m in range(n):
            h[m] += step * K[m, i]
        if e < best:
            best = e
            best_k = k
    return best, best_k


def gray_to_spins(k: int, n: int, offset: int = 0) -> np.ndarray:
    """Spin vector visited at Gray-code step ``k`` (bit b set -> spin b+offset is -1)."""
    g = k ^ (k >> 1)
    s = np.ones(n, dtype=np.int64)
    for b in range(n - offset):
        if (g >> b) & 1:
            s[b + offset] = -1
    return s


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise ValueError(f"exhaustive search over {n} variables exceeds the cap of {cap}")


def all_points(n: int, domain: VariableDomain) -> np.ndarray:
    """Every point of the hypercube, row ``m`` is the binary expansion of ``m``."""
    bits = ((np.arange(1 << n)[:, None] >> np.arange(n)) & 1).astype(np.int64)
    return bits if domain is VariableDomain.BOOLEAN else 2 * bits - 1


def solve_exhaustive(
    objective,
    constraint: tuple[np.ndarray, float] | None = None,
    inequalities: Sequence = (),
    cap: int = EXHAUSTIVE_CAP,
    tol: float = 0.0,
) -> SolveResult:
    """Global minimum by enumeration.

    ``objective`` is a :class:`BinaryPolynomial`, an :class:`IsingModel`, a
    :class:`QuboModel`, or a square matrix ``A`` meaning ``min x^T A x`` over
    spins. ``constraint=(B, c)`` adds ``x^T B x >= c - tol`` (matrix objectives
    only); the quadratic-form path fixes ``x_0 = +1`` because both forms are
    invariant under a global flip. ``inequalities`` is a list of objects with
    ``values(X)`` meaning ``g(x) <= tol`` (polynomial objectives only).

    When no point is feasible the result has ``feasible=False`` and carries the
    least-violating point.
    """
    t0 = time.perf_counter()
    if isinstance(objective, np.ndarray) or (isinstance(objective, (list, tuple)) and np.ndim(objective) == 2):
        A = np.asarray(objective, dtype=float)
        n = A.shape[0]
        _check_cap(n, cap)
        A = np.ascontiguousarray(0.5 * (A + A.T))
        if constraint is not None:
            B, c = constraint
            B = np.ascontiguousarray(0.5 * (np.asarray(B, dtype=float) + np.asarray(B, dtype=float).T))
            best, best_k, found, _, max_k = _gray_quadform(A, B, float(c) - tol, True)
        else:
            best, best_k, found, _, max_k = _gray_quadform(A, A, 0.0, False)
        k = best_k if found else max_k
        s = gray_to_spins(int(k), n, offset=1)
        return SolveResult(Assignment(VariableDomain.ISING, s), float(s @ A @ s), 0, time.perf_counter() - t0, bool(found))

    if isinstance(objective, QuboModel):
        res = solve_exhaustive(boolean_to_ising(objective), cap=cap)
        x = (res.assignment.values + 1) // 2
        res.assignment = Assignment(VariableDomain.BOOLEAN, x)
        res.energy = objective.energy(x)
        res.wall_time = time.perf_counter() - t0
        return res

    if isinstance(objective, IsingModel) and not inequalities:
        n = objective.num_vars
        _check_cap(n, cap)
        K = np.ascontiguousarray(objective.symmetric)
        _, best_k = _gray_ising(K, np.ascontiguousarray(objective.a))
        g = best_k ^ (best_k >> 1)
        s = np.array([-1 if (g >> b) & 1 else 1 for b in range(n)], dtype=np.int64)
        return SolveResult(Assignment(VariableDomain.ISING, s), objective.energy(s), 0, time.perf_counter() - t0)

    if isinstance(objective, IsingModel):
        objective = objective.to_polynomial()
    if not isinstance(objective, BinaryPolynomial):
        raise TypeError(f"unsupported objective type {type(objective).__name__}")
    n = objective.num_vars
    _check_cap(n, cap)
    best_val, best_x, best_viol, best_viol_x = np.inf, None, np.inf, None
    chunk = 1 << 16
    for start in range(0, 1 << n, chunk):
        idx = np.arange(start, min(start + chunk, 1 << n))
        bits = (idx[:, None] >> np.arange(n)) & 1
        X = bits if objective.domain is VariableDomain.BOOLEAN else 2 * bits - 1
        vals = objective.values(X)
        ok = np.ones(len(X), dtype=bool)
        viol = np.zeros(len(X))
        for g in inequalities:
            gv = g.values(X)
            ok &= gv <= tol
            viol = np.maximum(viol, gv)
        if ok.any():
            m = np.flatnonzero(ok)[np.argmin(vals[ok])]
            if vals[m] < best_val:
                best_val, best_x = vals[m], X[m]
        m = int(np.argmin(viol))
        if viol[m] < best_viol:
            best_viol, best_viol_x = viol[m], X[m]
    found = best_x is not None
    x = best_x if found else best_viol_x
    point = Assignment(objective.domain, x)
    return SolveResult(point, objective.value(x), 0, time.perf_counter() - t0, found)


# ---------------------------------------------------------------------------
# local search and sampling


def greedy_bit_flip(objective, start) -> Assignment:
    """Single-bit-flip descent: keep a flip iff it strictly lowers the objective.

    Sweeps indices ``0..N-1`` until a full pass changes nothing (at most N
    passes). Objectives that provide their own ``greedy_bit_flip`` (structured
    quadratic-form composites) are delegated to.
    """
    if not isinstance(objective, BinaryPolynomial) and hasattr(objective, "greedy_bit_flip"):
        return objective.greedy_bit_flip(start)
    domain = objective.domain
    x = as_point(start, domain, objective.num_vars).copy()
    n = objective.num_vars
    f = objective.value(x)
    for _ in range(max(n, 1)):
        changed = False
        for i in range(n):
            new = 1 - x[i] if domain is VariableDomain.BOOLEAN else -x[i]
            old = x[i]
            x[i] = new
            fn = objective.value(x)
            if fn < f:
                f = fn
                changed = True
            else:
                x[i] = old
        if not changed:
            break
    return Assignment(domain, x)


def random_search(
    objective: Callable[[np.ndarray], np.ndarray],
    feasible: Callable[[np.ndarray], np.ndarray],
    num_vars: int,
    n_samples: int,
    seed: int = 0,
    domain=VariableDomain.ISING,
    batch: int = 4096,
) -> SolveResult:
    """Best feasible point among ``n_samples`` uniform i.i.d. assignments.

    ``objective`` and ``feasible`` are vectorized over the rows of a sample
    matrix. If no sample is feasible the result is flagged infeasible and
    carries the lowest-objective sample.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    domain = VariableDomain.parse(domain)
    t0 = time.perf_counter()
    rng = restart_rng(seed, 0)
    lo, hi = domain.values
    best_val, best_x, any_val, any_x = np.inf, None, np.inf, None
    remaining = n_samples
    while remaining:
        m = min(batch, remaining)
        remaining -= m
        X = np.where(rng.random((m, num_vars)) < 0.5, lo, hi).astype(np.int64)
        vals = np.asarray(objective(X), dtype=float)
        ok = np.asarray(feasible(X), dtype=bool)
        j = int(np.argmin(vals))
        if vals[j] < any_val:
            any_val, any_x = vals[j], X[j]
        if ok.any():
            j = np.flatnonzero(ok)[np.argmin(vals[ok])]
            if vals[j] < best_val:
                best_val, best_x = vals[j], X[j]
    found = best_x is not None
    x = best_x if found else any_x
    return SolveResult(Assignment(domain, x), best_val if found else any_val, 0, time.perf_counter() - t0, found)


# ---------------------------------------------------------------------------
# dispatch

SOLVERS = ("dsb", "sa", "exhaustive")


def make_solver_config(solver: str, **kwargs):
    if solver == "dsb":
        return DsbConfig(**kwargs)
    if solver == "sa":
        return SaConfig(**kwargs)
    if solver == "exhaustive":
        return None
    raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")


def solve_ising(model: IsingModel, solver: str = "dsb", cfg=None) -> SolveResult:
    if solver == "dsb":
        return solve_dsb(model, cfg)
    if solver == "sa":
        return solve_sa(model, cfg)
    if solver == "exhaustive":
        return solve_exhaustive(model)
    raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")


def solve_quadratic(poly: BinaryPolynomial | QuboModel | IsingModel, solver: str = "dsb", cfg=None) -> SolveResult:
    """Solve a degree-<=2 problem in its native domain via the Ising solvers."""
    model = to_solver_model(poly) if isinstance(poly, BinaryPolynomial) else poly
    if isinstance(model, IsingModel):
        return solve_ising(model, solver, cfg)
    res = solve_ising(boolean_to_ising(model), solver, cfg)
    x = (res.assignment.values + 1) // 2
    res.assignment = Assignment(VariableDomain.BOOLEAN, x)
    res.energy = model.energy(x)
    return res
