import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isinghobo.constrained import AlmState, build_augmented_lagrangian
from isinghobo.hobo import HoboConfig, QuadraticFormComposite, derive_seed, minimize_hobo
from isinghobo.model import VariableDomain
from isinghobo.solvers import SaConfig, solve_exhaustive
from isinghobo.swipt import ScenarioConfig, generate_instance, to_constrained_problem

from conftest import hypercube, random_poly

I, B = VariableDomain.ISING, VariableDomain.BOOLEAN


def _sym(rng, n):
    m = rng.normal(size=(n, n))
    return m + m.T


def test_quadratic_objective_solved_in_one_iteration():
    p = random_poly(np.random.default_rng(0), 10, B, max_degree=2, n_terms=30)
    res = minimize_hobo(p, HoboConfig(solver="exhaustive"))
    assert len(res.trace) == 1
    assert res.value == pytest.approx(p.values(hypercube(10, B)).min(), abs=1e-12)


def test_start_at_minimum_is_fixed_point():
    p = random_poly(np.random.default_rng(1), 8, I, max_degree=4, n_terms=20)
    x_star = solve_exhaustive(p).assignment.values
    res = minimize_hobo(p, HoboConfig(solver="exhaustive", initial_point=x_star))
    assert np.array_equal(res.best.values, x_star)
    assert res.value == pytest.approx(p.value(x_star))


def test_never_worse_than_initial_point():
    rng = np.random.default_rng(2)
    for _ in range(10):
        p = random_poly(rng, 9, I, max_degree=4, n_terms=25)
        res = minimize_hobo(p, HoboConfig(solver="sa", solver_config=SaConfig(sweeps=50), seed=int(rng.integers(99))))
        assert res.value <= res.initial_value + 1e-12
        assert res.value == pytest.approx(p.value(res.best.values))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 10_000), domain=st.sampled_from([B, I]))
def test_best_so_far_is_monotone(seed, domain):
    p = random_poly(np.random.default_rng(seed), 7, domain, max_degree=4, n_terms=15)
    res = minimize_hobo(p, HoboConfig(solver="exhaustive", seed=seed, max_iters=10))
    bsf = res.trace.best_so_far
    assert all(b <= a for a, b in zip(bsf, bsf[1:]))
    assert res.value == bsf[-1] or res.value == res.initial_value
    assert len(res.trace) <= 10


def test_swipt_augmented_lagrangian_trace():
    inst = generate_instance(ScenarioConfig(n_elements=14), 0)
    p = to_constrained_problem(inst)
    state = AlmState(np.array([3.0]), 5.5, np.array([1.0]), 1)
    F = build_augmented_lagrangian(p, state)
    res = minimize_hobo(F, HoboConfig(solver="sa", max_iters=30, seed=3))
    bsf = res.trace.best_so_far
    assert len(res.trace) <= 30
    assert all(b <= a for a, b in zip(bsf, bsf[1:]))
    assert res.value <= res.initial_value


def test_iteration_limit_validation():
    with pytest.raises(ValueError):
        HoboConfig(max_iters=0)
    with pytest.raises(ValueError):
        HoboConfig(stall_limit=0)


# -- structured composite -----------------------------------------------------


def test_composite_matches_expanded_polynomial():
    rng = np.random.default_rng(4)
    n = 6
    f = QuadraticFormComposite(_sym(rng, n), 0.7, _sym(rng, n), -0.3, 1.5)
    poly = f.to_polynomial()
    X = hypercube(n, I)
    assert np.allclose(f.values(X), poly.values(X))
    direct = [0.7 * x @ f.a_matrix @ x - 0.3 * (x @ f.b_matrix @ x) ** 2 + 1.5 for x in X.astype(float)]
    assert np.allclose(f.values(X), direct)


def test_composite_derivatives_match_finite_differences():
    # gradient and Hessian of the real function, not of its multilinear reduction
    rng = np.random.default_rng(5)
    n = 7
    f = QuadraticFormComposite(_sym(rng, n), -1.0, _sym(rng, n), 0.4, 2.0)
    real = lambda x: -x @ f.a_matrix @ x + 0.4 * (x @ f.b_matrix @ x) ** 2 + 2.0
    x0 = hypercube(n, I)[37].astype(float)
    grad, hess = f.gradient_hessian(x0)
    eps, E = 1e-4, np.eye(n)
    fd = np.array([(real(x0 + eps * e) - real(x0 - eps * e)) / (2 * eps) for e in E])
    assert np.allclose(grad, fd, rtol=1e-6, atol=1e-6 * np.abs(fd).max())
    fd_h = np.array([[(real(x0 + eps * (E[i] + E[j])) - real(x0 + eps * (E[i] - E[j]))
                       - real(x0 - eps * (E[i] - E[j])) + real(x0 - eps * (E[i] + E[j]))) / (4 * eps * eps)
                      for j in range(n)] for i in range(n)])
    np.fill_diagonal(fd_h, 0.0)
    assert np.allclose(hess, fd_h, rtol=1e-5, atol=1e-5 * np.abs(fd_h).max())
    assert np.all(np.diag(hess) == 0)


def test_composite_surrogate_anchors_at_expansion_point():
    rng = np.random.default_rng(6)
    for _ in range(10):
        n = 6
        f = QuadraticFormComposite(_sym(rng, n), rng.normal(), _sym(rng, n), rng.normal(), rng.normal())
        x0 = hypercube(n, I)[int(rng.integers(2**n))]
        t = f.taylor_quadratic(x0)
        assert t.degree <= 2
        assert t.value(x0) == pytest.approx(f.value(x0), rel=1e-12, abs=1e-12)


def test_composite_flip_values_and_greedy():
    rng = np.random.default_rng(6)
    n = 8
    f = QuadraticFormComposite(_sym(rng, n), 1.0, _sym(rng, n), 0.2)
    poly = f.to_polynomial()
    x = hypercube(n, I)[100]
    assert np.allclose(f.flip_values(x), poly.flip_values(x))
    y = f.greedy_bit_flip(x).values
    assert f.value(y) <= f.value(x)
    assert f.flip_values(y).min() >= f.value(y) - 1e-9


def test_composite_without_square_is_quadratic():
    rng = np.random.default_rng(7)
    f = QuadraticFormComposite(_sym(rng, 5), 2.0)
    assert f.is_quadratic
    assert f.to_polynomial().degree <= 2
    with pytest.raises(ValueError):
        QuadraticFormComposite(np.eye(3), 1.0, np.eye(4), 1.0)


def test_derive_seed_stable():
    assert derive_seed(1, "a", 2) == derive_seed(1, "a", 2)
    assert derive_seed(1, "a", 2) != derive_seed(1, "a", 3)
    assert 0 <= derive_seed("x") < 2**63
