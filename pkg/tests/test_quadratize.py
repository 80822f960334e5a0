import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from isinghobo.constrained import AlmState, build_augmented_lagrangian
from isinghobo.model import BinaryPolynomial, VariableDomain
from isinghobo.quadratize import (
    Substitution,
    penalty_weight_for,
    project_assignment,
    quadratize,
    substitution_penalty,
    substitutions_hold,
)
from isinghobo.swipt import ScenarioConfig, generate_instance, to_constrained_problem

from conftest import hypercube, random_poly

I, B = VariableDomain.ISING, VariableDomain.BOOLEAN


def _minimizers(poly):
    X = hypercube(poly.num_vars, poly.domain)
    v = poly.values(X)
    return v.min(), X[np.isclose(v, v.min(), atol=1e-9)]


def test_boolean_cubic_single_auxiliary():
    p = BinaryPolynomial(3, B, {(0, 1, 2): 1.0})
    r = quadratize(p)
    assert [s.pair for s in r.substitutions] == [(0, 1)]
    M = r.substitutions[0].penalty_weight
    assert M == 2.0
    expected = {(2, 3): 1.0, (3,): 3 * M, (0, 1): M, (0, 3): -2 * M, (1, 3): -2 * M}
    assert r.quadratic.terms == pytest.approx(expected)
    qmin, qarg = _minimizers(r.quadratic)
    pmin, parg = _minimizers(p)
    assert qmin == pytest.approx(pmin)
    projected = {tuple(x[:3]) for x in qarg}
    assert projected <= {tuple(x) for x in parg}


def test_boolean_all_ones_minimizer_projects():
    p = BinaryPolynomial(3, B, {(0, 1, 2): -1.0})
    r = quadratize(p)
    _, qarg = _minimizers(r.quadratic)
    assert [x.tolist() for x in qarg] == [[1, 1, 1, 1]]
    assert project_assignment(r, qarg[0]).values.tolist() == [1, 1, 1]


def test_ising_cubic_two_auxiliaries():
    p = BinaryPolynomial(3, I, {(0, 1, 2): 1.0})
    r = quadratize(p)
    assert r.num_aux == 2
    assert r.substitutions[0].aux_vars == (3, 4)
    qmin, qarg = _minimizers(r.quadratic)
    pmin, parg = _minimizers(p)
    assert qmin == pytest.approx(pmin)
    assert {tuple(x[:3]) for x in qarg} <= {tuple(x) for x in parg}
    assert all(substitutions_hold(r, x) for x in qarg)


def test_ising_penalty_zero_exactly_on_product():
    sub = Substitution((0, 1), (2, 3), 1.0)
    terms = substitution_penalty(sub, I)
    pen = lambda x: sum(c * np.prod([x[v] for v in k]) for k, c in terms.items())
    for x0, x1, y in hypercube(3, I):
        best = min(pen((x0, x1, y, d)) for d in (-1, 1))
        if y == x0 * x1:
            assert best == 0.0
        else:
            assert best >= 1.0


def test_degree_two_is_identity():
    p = random_poly(np.random.default_rng(0), 6, I, max_degree=2)
    r = quadratize(p)
    assert r.substitutions == [] and r.quadratic == p and r.num_aux == 0
    x = hypercube(6, I)[9]
    assert np.array_equal(project_assignment(r, x).values, x)


def test_penalty_weight_examples():
    assert penalty_weight_for([1.0]) == 2.0
    assert penalty_weight_for([3.0, -3.0]) == 7.0
    with pytest.raises(ValueError):
        penalty_weight_for([])


def test_substitution_validation():
    with pytest.raises(ValueError):
        Substitution((1, 1), (2,), 1.0)
    with pytest.raises(ValueError):
        Substitution((0, 1), (2,), 0.0)


def test_project_length_mismatch():
    r = quadratize(BinaryPolynomial(3, B, {(0, 1, 2): 1.0}))
    with pytest.raises(ValueError):
        project_assignment(r, [0, 1, 1])


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 100_000), domain=st.sampled_from([B, I]), n=st.integers(3, 6))
def test_enumeration_equivalence(seed, domain, n):
    p = random_poly(np.random.default_rng(seed), n, domain, max_degree=5, n_terms=8, integer=True)
    r = quadratize(p)
    q = r.quadratic
    assert q.degree <= 2
    assert all(v >= r.original_num_vars for s in r.substitutions for v in s.aux_vars)
    if q.num_vars > 16:
        return
    qmin, qarg = _minimizers(q)
    pmin, parg = _minimizers(p)
    assert qmin == pytest.approx(pmin, abs=1e-9)
    originals = {tuple(x) for x in parg}
    for x in qarg:
        assert substitutions_hold(r, x)
        assert tuple(x[:n]) in originals


def test_greedy_picks_most_shared_pair_then_lexicographic():
    p = BinaryPolynomial(5, B, {(0, 1, 2): 1.0, (1, 2, 3): 1.0, (1, 2, 4): 1.0, (0, 3, 4): 1.0})
    r = quadratize(p)
    assert r.substitutions[0].pair == (1, 2)
    assert r.substitutions[0].penalty_weight == 4.0
    assert r.substitutions[1].pair == (0, 3)


def test_quartic_reuses_auxiliaries():
    p = BinaryPolynomial(5, B, {(0, 1, 2, 3): 1.0, (0, 1, 2, 4): -2.0, (0, 1, 3, 4): 1.5})
    r = quadratize(p)
    assert r.quadratic.degree <= 2
    assert [s.pair for s in r.substitutions][:2] == [(0, 1), (2, 5)]
    assert _minimizers(r.quadratic)[0] == pytest.approx(_minimizers(p)[0])


# counts reported for the SWIPT augmented Lagrangian (λ=3, μ=5.5, zero slack)
REFERENCE_COUNTS = {10: (92, 472), 12: (144, 891), 16: (256, 2540), 20: (400, 5985), 24: (576, 12282)}


def swipt_al_counts(n, channel=0):
    p = to_constrained_problem(generate_instance(ScenarioConfig(n_elements=n), channel))
    F = build_augmented_lagrangian(p, AlmState(np.array([3.0]), 5.5, np.array([0.0]), 1))
    return quadratize(F.to_polynomial()).counts()


@pytest.mark.parametrize("n", sorted(REFERENCE_COUNTS))
def test_swipt_counts_match_reported_table(n):
    c = swipt_al_counts(n)
    assert c["variables"] <= n * n
    assert (c["variables"], c["quadratic_terms"]) == REFERENCE_COUNTS[n]
    assert c["linear_terms"] == c["variables"]
