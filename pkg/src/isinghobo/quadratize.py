"""Order reduction of higher-order binary polynomials by pair substitution.

A pair ``(i, j)`` occurring in monomials of degree >= 3 is replaced by an
auxiliary variable ``y`` and the identity ``y = x_i x_j`` is enforced with a
penalty that vanishes exactly when it holds:

* Boolean (Rosenberg):   ``M (3y + x_i x_j - 2 x_i y - 2 x_j y)``
* Ising (second aux d):  ``M (4 + x_i + x_j - y - 2d + x_i x_j - x_i y - x_j y
  - 2 x_i d - 2 x_j d + 2 y d)``

Pairs are chosen greedily: the pair contained in the most remaining
high-degree monomials goes first, ties broken by the lexicographically
smallest pair.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .model import Assignment, BinaryPolynomial, VariableDomain, as_point

__all__ = ["Substitution", "QuadratizationResult", "quadratize", "project_assignment", "penalty_weight_for", "substitution_penalty"]


@dataclass(frozen=True)
class Substitution:
    pair: tuple[int, int]
    aux_vars: tuple[int, ...]
    penalty_weight: float

    def __post_init__(self):
        if self.pair[0] == self.pair[1]:
            raise ValueError("substituted pair must be two distinct variables")
        if not self.penalty_weight > 0:
            raise ValueError("penalty weight must be positive")

    def to_dict(self) -> dict:
        return {"pair": list(self.pair), "aux": list(self.aux_vars), "M": self.penalty_weight}


@dataclass
class QuadratizationResult:
    quadratic: BinaryPolynomial
    substitutions: list[Substitution] = field(default_factory=list)
    original_num_vars: int = 0

    @property
    def num_aux(self) -> int:
        return self.quadratic.num_vars - self.original_num_vars

    def counts(self) -> dict:
        """Variable and term counts of the quadratic model."""
        linear = sum(1 for k in self.quadratic.terms if len(k) == 1)
        quadratic = sum(1 for k in self.quadratic.terms if len(k) == 2)
        return {"variables": self.quadratic.num_vars, "linear_terms": linear, "quadratic_terms": quadratic}


def penalty_weight_for(coefficients) -> float:
    """``1 + sum |c|`` over the coefficients of the monomials being rewritten."""
    coefficients = list(coefficients)
    if not coefficients:
        raise ValueError("penalty weight needs at least one affected term")
    return 1.0 + float(np.sum(np.abs(coefficients)))


def substitution_penalty(sub: Substitution, domain: VariableDomain) -> dict[tuple, float]:
    """Penalty terms of one substitution (the empty key holds the constant)."""
    i, j = sub.pair
    M = sub.penalty_weight
    if domain is VariableDomain.BOOLEAN:
        (y,) = sub.aux_vars
        raw = {(y,): 3.0, (i, j): 1.0, (i, y): -2.0, (j, y): -2.0}
    else:
        y, d = sub.aux_vars
        raw = {
            (): 4.0, (i,): 1.0, (j,): 1.0, (y,): -1.0, (d,): -2.0,
            (i, j): 1.0, (i, y): -1.0, (j, y): -1.0, (i, d): -2.0, (j, d): -2.0, (y, d): 2.0,
        }
    return {tuple(sorted(k)): M * c for k, c in raw.items()}


def quadratize(poly: BinaryPolynomial) -> QuadratizationResult:
    """Rewrite ``poly`` as a quadratic over original plus auxiliary variables.

    The minimum of the result over all variables equals the minimum of
    ``poly``, and every minimizer restricted to the first ``poly.num_vars``
    entries minimizes ``poly``.
    """
    n0 = poly.num_vars
    if poly.degree <= 2:
        return QuadratizationResult(poly, [], n0)
    domain = poly.domain
    n_aux = 1 if domain is VariableDomain.BOOLEAN else 2

    mono: dict[tuple, float] = dict(poly.terms)
    holders: dict[tuple, set] = {}
    for key in mono:
        if len(key) >= 3:
            for pair in itertools.combinations(key, 2):
                holders.setdefault(pair, set()).add(key)

    next_var = n0
    subs: list[Substitution] = []
    while holders:
        pair = min(holders, key=lambda p: (-len(holders[p]), p))
        affected = sorted(holders.pop(pair))
        weight = penalty_weight_for(mono[k] for k in affected)
        aux = tuple(range(next_var, next_var + n_aux))
        next_var += n_aux
        y = aux[0]
        for key in affected:
            coeff = mono.pop(key)
            for p in itertools.combinations(key, 2):
                if p == pair:
                    continue
                bucket = holders.get(p)
                if bucket is not None:
                    bucket.discard(key)
                    if not bucket:
                        del holders[p]
            new_key = tuple(sorted([v for v in key if v not in pair] + [y]))
            mono[new_key] = mono.get(new_key, 0.0) + coeff
            if len(new_key) >= 3:
                for p in itertools.combinations(new_key, 2):
                    holders.setdefault(p, set()).add(new_key)
        subs.append(Substitution(pair, aux, weight))

    constant = poly.constant
    terms = mono
    for sub in subs:
        for key, c in substitution_penalty(sub, domain).items():
            if key:
                terms[key] = terms.get(key, 0.0) + c
            else:
                constant += c
    return QuadratizationResult(BinaryPolynomial(next_var, domain, terms, constant), subs, n0)


def project_assignment(result: QuadratizationResult, extended) -> Assignment:
    """Drop the auxiliary variables of an extended assignment."""
    x = as_point(extended, result.quadratic.domain, result.quadratic.num_vars)
    return Assignment(result.quadratic.domain, x[: result.original_num_vars])


def substitutions_hold(result: QuadratizationResult, extended) -> bool:
    """True when every auxiliary ``y`` equals the product of its pair and each penalty is zero."""
    x = as_point(extended, result.quadratic.domain, result.quadratic.num_vars)
    domain = result.quadratic.domain
    for sub in result.substitutions:
        i, j = sub.pair
        if x[sub.aux_vars[0]] != x[i] * x[j]:
            return False
        penalty = sum(c * np.prod([x[v] for v in k]) for k, c in substitution_penalty(sub, domain).items())
        if abs(penalty) > 1e-9 * sub.penalty_weight:
            return False
    return True
