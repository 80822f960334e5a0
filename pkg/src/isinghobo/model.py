"""Binary polynomials, QUBO/Ising quadratic models and conversions between them.

A :class:`BinaryPolynomial` is a sparse multilinear polynomial over Boolean
``{0, 1}`` or Ising ``{-1, +1}`` variables. Terms are keyed by sorted,
duplicate-free index tuples; the domain identities ``x**2 == x`` (Boolean) and
``s**2 == 1`` (Ising) are applied on construction so every polynomial has a
single canonical form.

:class:`QuboModel` and :class:`IsingModel` are the dense quadratic forms the
solvers consume::

    QUBO:   E(x) = x^T Q x + constant,         Q lower triangular
    Ising:  E(s) = s^T J s + a^T s + constant, J strictly lower triangular
"""
from __future__ import annotations

import enum
import itertools
import math
import re
from dataclasses import dataclass
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "VariableDomain",
    "Assignment",
    "BinaryPolynomial",
    "QuboModel",
    "IsingModel",
    "canonicalize",
    "evaluate",
    "ising_to_boolean",
    "boolean_to_ising",
    "absorb_linear_terms",
    "gradient_hessian",
    "taylor_quadratic",
    "taylor_from_derivatives",
    "to_solver_model",
    "dumps_polynomial",
    "loads_polynomial",
    "read_polynomial",
    "write_polynomial",
]


class VariableDomain(str, enum.Enum):
    BOOLEAN = "boolean"
    ISING = "ising"

    @property
    def values(self) -> tuple[int, int]:
        return (0, 1) if self is VariableDomain.BOOLEAN else (-1, 1)

    @classmethod
    def parse(cls, value) -> "VariableDomain":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown variable domain {value!r}") from None


@dataclass(frozen=True)
class Assignment:
    """A point of the Boolean or Ising hypercube."""

    domain: VariableDomain
    values: np.ndarray

    def __post_init__(self):
        domain = VariableDomain.parse(self.domain)
        values = np.asarray(self.values, dtype=np.int64).reshape(-1)
        _check_domain_values(values, domain)
        values.setflags(write=False)
        object.__setattr__(self, "domain", domain)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return len(self.values)

    def to_domain(self, domain: VariableDomain) -> "Assignment":
        domain = VariableDomain.parse(domain)
        if domain is self.domain:
            return self
        if domain is VariableDomain.ISING:
            return Assignment(domain, 2 * self.values - 1)
        return Assignment(domain, (self.values + 1) // 2)


def _check_domain_values(values: np.ndarray, domain: VariableDomain) -> None:
    lo, hi = domain.values
    if not np.all((values == lo) | (values == hi)):
        raise ValueError(f"assignment has entries outside {{{lo}, {hi}}} for the {domain.value} domain")


def as_point(point, domain: VariableDomain, num_vars: int) -> np.ndarray:
    """Validate ``point`` (an :class:`Assignment` or array-like) and return its values."""
    if isinstance(point, Assignment):
        if point.domain is not domain:
            raise ValueError(f"domain mismatch: point is {point.domain.value}, expected {domain.value}")
        values = point.values
    else:
        values = np.asarray(point)
        if values.ndim != 1:
            raise ValueError("assignment must be one-dimensional")
        if not np.issubdtype(values.dtype, np.integer):
            rounded = np.rint(values)
            if not np.array_equal(rounded, values):
                raise ValueError("assignment entries must be integral")
            values = rounded
        values = values.astype(np.int64)
        _check_domain_values(values, domain)
    if len(values) != num_vars:
        raise ValueError(f"length mismatch: got {len(values)} values for {num_vars} variables")
    return values


# ---------------------------------------------------------------------------
# polynomial algebra


def _merge_keys(a: tuple, b: tuple, domain: VariableDomain) -> tuple:
    if domain is VariableDomain.BOOLEAN:
        return tuple(sorted(set(a).union(b)))
    return tuple(sorted(set(a).symmetric_difference(b)))


def _reduce_multiset(indices: Iterable[int], domain: VariableDomain) -> tuple:
    counts: dict[int, int] = {}
    for i in indices:
        counts[int(i)] = counts.get(int(i), 0) + 1
    if domain is VariableDomain.BOOLEAN:
        return tuple(sorted(counts))
    return tuple(sorted(i for i, k in counts.items() if k % 2 == 1))


class BinaryPolynomial:
    """Canonical multilinear polynomial over binary variables.

    Instances are immutable. Build them with :func:`canonicalize` (arbitrary
    index multisets) or directly from an already canonical term mapping.
    """

    __slots__ = ("num_vars", "domain", "_terms", "constant", "_compiled")

    def __init__(self, num_vars: int, domain, terms: Mapping[tuple, float] | None = None, constant: float = 0.0):
        domain = VariableDomain.parse(domain)
        num_vars = int(num_vars)
        if num_vars < 0:
            raise ValueError("num_vars must be non-negative")
        clean: dict[tuple, float] = {}
        for key, coeff in (terms or {}).items():
            key = tuple(int(i) for i in key)
            if not key:
                raise ValueError("the empty monomial belongs in `constant`")
            if any(b <= a for a, b in zip(key, key[1:])):
                raise ValueError(f"term {key} is not sorted and duplicate-free")
            if key[0] < 0 or key[-1] >= num_vars:
                raise IndexError(f"term {key} references a variable outside 0..{num_vars - 1}")
            coeff = float(coeff)
            if coeff != 0.0:
                clean[key] = coeff
        self.num_vars = num_vars
        self.domain = domain
        self._terms = MappingProxyType(clean)
        self.constant = float(constant)
        self._compiled = None

    # -- basic protocol ---------------------------------------------------
    @property
    def terms(self) -> Mapping[tuple, float]:
        return self._terms

    @property
    def degree(self) -> int:
        return max((len(k) for k in self._terms), default=0)

    def __len__(self) -> int:
        return len(self._terms)

    def __repr__(self) -> str:
        return (
            f"BinaryPolynomial(num_vars={self.num_vars}, domain={self.domain.value}, "
            f"terms={len(self._terms)}, degree={self.degree}, constant={self.constant:g})"
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryPolynomial):
            return NotImplemented
        return (
            self.num_vars == other.num_vars
            and self.domain is other.domain
            and self.constant == other.constant
            and dict(self._terms) == dict(other._terms)
        )

    __hash__ = None

    def coefficient(self, key: Sequence[int]) -> float:
        key = tuple(key)
        if not key:
            return self.constant
        return self._terms.get(key, 0.0)

    def with_num_vars(self, num_vars: int) -> "BinaryPolynomial":
        if num_vars < self.num_vars and any(k[-1] >= num_vars for k in self._terms):
            raise ValueError("cannot shrink below the largest used index")
        return BinaryPolynomial(num_vars, self.domain, self._terms, self.constant)

    # -- arithmetic -------------------------------------------------------
    def _coerce(self, other) -> "BinaryPolynomial":
        if isinstance(other, BinaryPolynomial):
            if other.domain is not self.domain:
                raise ValueError("cannot combine polynomials over different domains")
            return other
        if np.isscalar(other):
            return BinaryPolynomial(self.num_vars, self.domain, constant=float(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        terms = dict(self._terms)
        for key, coeff in other._terms.items():
            terms[key] = terms.get(key, 0.0) + coeff
        return BinaryPolynomial(max(self.num_vars, other.num_vars), self.domain, terms, self.constant + other.constant)

    __radd__ = __add__

    def __neg__(self):
        return self * -1.0

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            s = float(other)
            return BinaryPolynomial(self.num_vars, self.domain, {k: s * c for k, c in self._terms.items()}, s * self.constant)
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        left = list(self._terms.items()) + ([((), self.constant)] if self.constant else [])
        right = list(other._terms.items()) + ([((), other.constant)] if other.constant else [])
        terms: dict[tuple, float] = {}
        constant = 0.0
        for ka, ca in left:
            for kb, cb in right:
                key = _merge_keys(ka, kb, self.domain)
                if key:
                    terms[key] = terms.get(key, 0.0) + ca * cb
                else:
                    constant += ca * cb
        return BinaryPolynomial(max(self.num_vars, other.num_vars), self.domain, terms, constant)

    __rmul__ = __mul__

    def __pow__(self, k: int):
        if not isinstance(k, int) or k < 0:
            raise ValueError("only non-negative integer powers are supported")
        out = BinaryPolynomial(self.num_vars, self.domain, constant=1.0)
        for _ in range(k):
            out = out * self
        return out

    # -- evaluation -------------------------------------------------------
    def _groups(self):
        """Terms grouped by degree as (index array, coefficient array) pairs."""
        if self._compiled is None:
            by_degree: dict[int, tuple[list, list]] = {}
            for key, coeff in self._terms.items():
                idx, cs = by_degree.setdefault(len(key), ([], []))
                idx.append(key)
                cs.append(coeff)
            self._compiled = [
                (np.asarray(idx, dtype=np.int64).reshape(len(idx), d), np.asarray(cs, dtype=float))
                for d, (idx, cs) in sorted(by_degree.items())
            ]
        return self._compiled

    def value(self, point) -> float:
        x = as_point(point, self.domain, self.num_vars).astype(float)
        total = self.constant
        for idx, coeffs in self._groups():
            total += float(coeffs @ np.prod(x[idx], axis=1))
        return total

    def values(self, points: np.ndarray, chunk: int = 1 << 14) -> np.ndarray:
        """Evaluate at every row of ``points`` (no domain validation)."""
        X = np.asarray(points, dtype=float)
        if X.ndim != 2 or X.shape[1] != self.num_vars:
            raise ValueError(f"expected an (M, {self.num_vars}) array")
        out = np.full(X.shape[0], self.constant)
        for start in range(0, X.shape[0], chunk):
            block = X[start:start + chunk]
            for idx, coeffs in self._groups():
                out[start:start + chunk] += np.prod(block[:, idx], axis=2) @ coeffs
        return out

    # -- calculus on the real relaxation ---------------------------------
    def gradient_hessian(self, point) -> tuple[np.ndarray, np.ndarray]:
        x = as_point(point, self.domain, self.num_vars).astype(float)
        n = self.num_vars
        grad = np.zeros(n)
        hess = np.zeros((n, n))
        for idx, coeffs in self._groups():
            vals = x[idx]
            d = idx.shape[1]
            for p in range(d):
                others = np.prod(np.delete(vals, p, axis=1), axis=1)
                np.add.at(grad, idx[:, p], coeffs * others)
            for p, q in itertools.combinations(range(d), 2):
                others = np.prod(np.delete(vals, [p, q], axis=1), axis=1)
                np.add.at(hess, (idx[:, p], idx[:, q]), coeffs * others)
        hess = hess + hess.T
        return grad, hess

    def taylor_quadratic(self, point) -> "BinaryPolynomial":
        x0 = as_point(point, self.domain, self.num_vars)
        if self.degree <= 2:
            # second-order expansion of a quadratic multilinear form is the form itself
            return self
        grad, hess = self.gradient_hessian(x0)
        return taylor_from_derivatives(self.value(x0), grad, hess, x0, self.domain)

    def flip_values(self, point) -> np.ndarray:
        """Objective value after flipping each single variable of ``point``."""
        x = as_point(point, self.domain, self.num_vars)
        n = self.num_vars
        X = np.repeat(x[None, :], n, axis=0)
        diag = np.arange(n)
        X[diag, diag] = (1 - X[diag, diag]) if self.domain is VariableDomain.BOOLEAN else -X[diag, diag]
        return self.values(X)


def canonicalize(raw_terms: Iterable[tuple[Sequence[int], float]], domain, num_vars: int) -> BinaryPolynomial:
    """Reduce arbitrary monomials (index multisets) to the canonical polynomial.

    >>> canonicalize([((0, 0), 3.0)], "boolean", 1).terms
    mappingproxy({(0,): 3.0})
    """
    domain = VariableDomain.parse(domain)
    terms: dict[tuple, float] = {}
    constant = 0.0
    for indices, coeff in raw_terms:
        indices = [int(i) for i in indices]
        for i in indices:
            if i < 0 or i >= num_vars:
                raise IndexError(f"index {i} out of range for {num_vars} variables")
        key = _reduce_multiset(indices, domain)
        if key:
            terms[key] = terms.get(key, 0.0) + float(coeff)
        else:
            constant += float(coeff)
    return BinaryPolynomial(num_vars, domain, terms, constant)


def evaluate(poly, point) -> float:
    """Value of a polynomial or quadratic model at one hypercube point."""
    if isinstance(point, Assignment) and isinstance(poly, (QuboModel, IsingModel)):
        expected = VariableDomain.BOOLEAN if isinstance(poly, QuboModel) else VariableDomain.ISING
        if point.domain is not expected:
            raise ValueError(f"domain mismatch: point is {point.domain.value}, expected {expected.value}")
        point = point.values
    if isinstance(poly, (BinaryPolynomial, QuboModel, IsingModel)):
        return poly.value(point) if isinstance(poly, BinaryPolynomial) else poly.energy(point)
    return poly.value(point)


def gradient_hessian(poly: BinaryPolynomial, x0) -> tuple[np.ndarray, np.ndarray]:
    """Gradient and zero-diagonal Hessian of the multilinear real relaxation at ``x0``."""
    return poly.gradient_hessian(x0)


def taylor_quadratic(poly, x0) -> BinaryPolynomial:
    """Second-order Taylor surrogate of ``poly`` around ``x0`` (degree <= 2).

    Uses the half-weighted Hessian term so quadratic inputs are reproduced
    exactly on the whole hypercube.
    """
    return poly.taylor_quadratic(x0)


def taylor_from_derivatives(f0: float, grad: np.ndarray, hess: np.ndarray, x0, domain) -> BinaryPolynomial:
    """Expand ``f0 + g.(x-x0) + 1/2 sum_{i!=j} H_ij (x_i-x0_i)(x_j-x0_j)``.

    The diagonal of ``hess`` is ignored.
    """
    domain = VariableDomain.parse(domain)
    x0 = np.asarray(x0, dtype=float)
    n = len(x0)
    H = np.array(hess, dtype=float)
    np.fill_diagonal(H, 0.0)
    linear = grad - H @ x0
    constant = f0 - grad @ x0 + 0.5 * x0 @ H @ x0
    terms: dict[tuple, float] = {(i,): linear[i] for i in range(n)}
    rows, cols = np.tril_indices(n, -1)
    for i, j in zip(rows.tolist(), cols.tolist()):
        terms[(j, i)] = 0.5 * (H[i, j] + H[j, i])
    return BinaryPolynomial(n, domain, terms, constant)


# ---------------------------------------------------------------------------
# dense quadratic models


@dataclass(frozen=True)
class QuboModel:
    """``E(x) = x^T Q x + constant`` over ``x in {0,1}^N`` with lower-triangular ``Q``."""

    q: np.ndarray
    constant: float = 0.0

    def __post_init__(self):
        q = np.array(self.q, dtype=float)
        if q.ndim != 2 or q.shape[0] != q.shape[1]:
            raise ValueError("Q must be square")
        if np.any(np.triu(q, 1) != 0):
            raise ValueError("Q must be lower triangular")
        q.setflags(write=False)
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "constant", float(self.constant))

    @property
    def num_vars(self) -> int:
        return self.q.shape[0]

    @property
    def domain(self) -> VariableDomain:
        return VariableDomain.BOOLEAN

    def energy(self, x) -> float:
        x = as_point(x, VariableDomain.BOOLEAN, self.num_vars).astype(float)
        return float(x @ self.q @ x) + self.constant

    def energies(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        return np.einsum("mi,ij,mj->m", X, self.q, X) + self.constant

    def to_polynomial(self) -> BinaryPolynomial:
        n = self.num_vars
        terms = {(i,): self.q[i, i] for i in range(n)}
        rows, cols = np.tril_indices(n, -1)
        for i, j in zip(rows.tolist(), cols.tolist()):
            terms[(j, i)] = self.q[i, j]
        return BinaryPolynomial(n, VariableDomain.BOOLEAN, terms, self.constant)


@dataclass(frozen=True)
class IsingModel:
    """``E(s) = s^T J s + a^T s + constant`` over ``s in {-1,+1}^N``.

    ``j`` is lower triangular with an exactly zero diagonal.
    """

    j: np.ndarray
    a: np.ndarray | None = None
    constant: float = 0.0

    def __post_init__(self):
        j = np.array(self.j, dtype=float)
        if j.ndim != 2 or j.shape[0] != j.shape[1]:
            raise ValueError("J must be square")
        if np.any(np.triu(j) != 0):
            raise ValueError("J must be strictly lower triangular (zero diagonal)")
        a = np.zeros(j.shape[0]) if self.a is None else np.array(self.a, dtype=float).reshape(-1)
        if a.shape != (j.shape[0],):
            raise ValueError("linear coefficient vector has the wrong length")
        j.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "j", j)
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "constant", float(self.constant))

    @classmethod
    def from_symmetric(cls, jsym: np.ndarray, a=None, constant: float = 0.0) -> "IsingModel":
        """Build from a symmetric coupling matrix ``K`` meaning ``sum_{i<j} K_ij s_i s_j``."""
        return cls(np.tril(np.asarray(jsym, dtype=float), -1), a, constant)

    @property
    def num_vars(self) -> int:
        return self.j.shape[0]

    @property
    def domain(self) -> VariableDomain:
        return VariableDomain.ISING

    @property
    def symmetric(self) -> np.ndarray:
        return self.j + self.j.T

    def energy(self, s) -> float:
        s = as_point(s, VariableDomain.ISING, self.num_vars).astype(float)
        return float(s @ self.j @ s + self.a @ s) + self.constant

    def energies(self, S: np.ndarray) -> np.ndarray:
        S = np.asarray(S, dtype=float)
        return np.einsum("mi,ij,mj->m", S, self.j, S) + S @ self.a + self.constant

    def to_polynomial(self) -> BinaryPolynomial:
        n = self.num_vars
        terms = {(i,): self.a[i] for i in range(n)}
        rows, cols = np.tril_indices(n, -1)
        for i, j in zip(rows.tolist(), cols.tolist()):
            terms[(j, i)] = self.j[i, j]
        return BinaryPolynomial(n, VariableDomain.ISING, terms, self.constant)


def ising_to_boolean(m: IsingModel) -> QuboModel:
    """Rewrite an Ising model over ``x = (s + 1) / 2``; energies agree pointwise."""
    ones = np.ones(m.num_vars)
    b = 2.0 * m.a - 2.0 * m.symmetric @ ones
    q = 4.0 * m.j + np.diag(b)
    constant = m.constant + ones @ m.j @ ones - m.a @ ones
    return QuboModel(q, constant)


def boolean_to_ising(m: QuboModel) -> IsingModel:
    """Rewrite a QUBO over ``s = 2x - 1``; diagonal entries fold into fields and the constant."""
    off = np.tril(m.q, -1)
    diag = np.diag(m.q)
    j = off / 4.0
    a = diag / 2.0 + (off + off.T).sum(axis=1) / 4.0
    constant = m.constant + off.sum() / 4.0 + diag.sum() / 2.0
    return IsingModel(j, a, constant)


def absorb_linear_terms(m: IsingModel) -> tuple[IsingModel, int]:
    """Fold linear fields into couplings with one ancilla spin (index ``N``).

    The energy of the returned model at ``(s, +1)`` equals ``m.energy(s)``.
    Because a field-free Ising energy is invariant under a global flip, a
    solution with the ancilla at ``-1`` maps back by negating every spin.
    """
    n = m.num_vars
    j = np.zeros((n + 1, n + 1))
    j[:n, :n] = m.j
    j[n, :n] = m.a
    return IsingModel(j, None, m.constant), n


def to_solver_model(poly: BinaryPolynomial) -> QuboModel | IsingModel:
    """Dense solver model for a polynomial of degree <= 2 in its native domain."""
    if poly.degree > 2:
        raise ValueError(f"polynomial has degree {poly.degree}; solver models are quadratic")
    n = poly.num_vars
    if poly.domain is VariableDomain.ISING:
        j = np.zeros((n, n))
        a = np.zeros(n)
        for key, coeff in poly.terms.items():
            if len(key) == 1:
                a[key[0]] += coeff
            else:
                j[key[1], key[0]] += coeff
        return IsingModel(j, a, poly.constant)
    q = np.zeros((n, n))
    for key, coeff in poly.terms.items():
        if len(key) == 1:
            q[key[0], key[0]] += coeff
        else:
            q[key[1], key[0]] += coeff
    return QuboModel(q, poly.constant)


# ---------------------------------------------------------------------------
# text format: header line then ``coeff i j k ...`` per term

_HEADER = re.compile(r"^\s*domain=(\w+)\s+num_vars=(\d+)\s+constant=(\S+)\s*$")


def dumps_polynomial(poly: BinaryPolynomial) -> str:
    lines = [f"domain={poly.domain.value} num_vars={poly.num_vars} constant={poly.constant!r}"]
    for key in sorted(poly.terms, key=lambda k: (len(k), k)):
        lines.append(" ".join([repr(poly.terms[key]), *map(str, key)]))
    return "\n".join(lines) + "\n"


def loads_polynomial(text: str) -> BinaryPolynomial:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.lstrip().startswith("#")]
    if not lines:
        raise ValueError("empty polynomial file")
    m = _HEADER.match(lines[0])
    if not m:
        raise ValueError("first line must be 'domain=<boolean|ising> num_vars=<N> constant=<c>'")
    domain = VariableDomain.parse(m.group(1))
    num_vars = int(m.group(2))
    constant = float(m.group(3))
    terms: dict[tuple, float] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split()
        coeff = float(fields[0])
        key = tuple(int(f) for f in fields[1:])
        if not key:
            raise ValueError(f"line {lineno}: constant terms belong in the header")
        if len(set(key)) != len(key):
            raise ValueError(f"line {lineno}: repeated index in term {key}")
        if list(key) != sorted(key):
            raise ValueError(f"line {lineno}: indices must be ascending")
        if key in terms:
            raise ValueError(f"line {lineno}: duplicate term {key}")
        if key[-1] >= num_vars or key[0] < 0:
            raise ValueError(f"line {lineno}: index out of range")
        if not math.isfinite(coeff):
            raise ValueError(f"line {lineno}: non-finite coefficient")
        terms[key] = coeff
    return BinaryPolynomial(num_vars, domain, terms, constant)


def read_polynomial(path) -> BinaryPolynomial:
    with open(path) as fh:
        return loads_polynomial(fh.read())


def write_polynomial(poly: BinaryPolynomial, path) -> None:
    with open(path, "w") as fh:
        fh.write(dumps_polynomial(poly))
