import itertools
import sys
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import strategies as st

from bvfix.space import MetricSpaceModel


def brute_worst_ratio(D, v):
    """Exact worst polygon ratio over ordered tuples, in rational arithmetic.

    Returns (ratio, witnesses) where witnesses are all tuples attaining it.
    Entries of D must be exactly representable (they are, as floats).
    """
    n = len(D)
    F = [[Fraction(float(x)) for x in row] for row in D]
    best, wits = None, []
    for u, w in itertools.permutations(range(n), 2):
        rest = [z for z in range(n) if z not in (u, w)]
        for chain in itertools.permutations(rest, v):
            hops = (u, *chain, w)
            path = sum(F[a][b] for a, b in zip(hops, hops[1:]))
            if path == 0:
                continue
            r = F[u][w] / path
            if best is None or r > best:
                best, wits = r, [(u, w, *chain)]
            elif r == best:
                wits.append((u, w, *chain))
    return best, wits


def squared_line(points):
    x = np.asarray(points, dtype=float)
    return MetricSpaceModel.from_matrix((x[:, None] - x[None, :]) ** 2, [str(int(p)) for p in points])


def abs_line(points):
    x = np.asarray(points, dtype=float)
    return MetricSpaceModel.from_matrix(np.abs(x[:, None] - x[None, :]), [str(p) for p in points])


@st.composite
def finite_spaces(draw, min_n=3, max_n=7):
    """Random symmetric matrices with positive off-diagonal entries."""
    n = draw(st.integers(min_n, max_n))
    vals = draw(
        st.lists(
            st.floats(0.125, 16.0, allow_nan=False, allow_infinity=False),
            min_size=n * (n - 1) // 2,
            max_size=n * (n - 1) // 2,
        )
    )
    D = np.zeros((n, n))
    D[np.triu_indices(n, 1)] = vals
    D = D + D.T
    return MetricSpaceModel.from_matrix(D)


def random_space(rng, n):
    """Seeded random finite space (not necessarily metric)."""
    A = rng.uniform(0.1, 4.0, (n, n))
    D = np.triu(A, 1)
    return MetricSpaceModel.from_matrix(D + D.T)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        title, passed, detail = results[key]
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {key}. {title}: {detail}")
