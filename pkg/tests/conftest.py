import itertools

import numpy as np
import pytest

from isinghobo.model import BinaryPolynomial, VariableDomain


def hypercube(n, domain):
    """All points of {0,1}^n or {-1,+1}^n, built without the package."""
    vals = (0, 1) if VariableDomain.parse(domain) is VariableDomain.BOOLEAN else (-1, 1)
    return np.array(list(itertools.product(vals, repeat=n)), dtype=np.int64).reshape(-1, n)


def naive_value(terms, constant, x):
    """Direct sum of coefficient * product, no canonical form assumed."""
    total = constant
    for key, c in terms.items():
        p = 1
        for i in key:
            p *= x[i]
        total += c * p
    return total


def random_poly(rng, n, domain, max_degree=4, n_terms=12, integer=False):
    terms = {}
    for _ in range(n_terms):
        d = int(rng.integers(1, min(max_degree, n) + 1))
        key = tuple(sorted(rng.choice(n, size=d, replace=False).tolist()))
        c = float(rng.integers(-5, 6)) if integer else float(rng.normal())
        terms[key] = terms.get(key, 0.0) + c
    const = float(rng.integers(-3, 4)) if integer else float(rng.normal())
    return BinaryPolynomial(n, domain, terms, const)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def acceptance(request):
    """Record one PASS/FAIL line per acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(criterion, ok, detail):
        line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)

    return report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split(":")[0].split()[1])):
            terminalreporter.write_line(line)
