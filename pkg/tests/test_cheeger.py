from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from cheeger_lab.cheeger import (
    boundary_size,
    cheeger_exact,
    cheeger_naive,
    gray_boundary_trace,
)
from cheeger_lab.errors import NotConnectedError, TooLargeError
from cheeger_lab.graph import Graph, Seed, complete_graph, cycle_graph, generate_regular


def test_k4(k4):
    result = cheeger_exact(k4)
    assert result.fraction == 2
    assert (result.numerator, result.denominator) == (4, 2)
    assert len(result.witness) == 2


def test_c6(c6):
    assert cheeger_exact(c6).fraction == Fraction(2, 3)
    assert cheeger_naive(c6).fraction == Fraction(2, 3)


def test_petersen(petersen):
    assert cheeger_exact(petersen).fraction == 1
    assert cheeger_naive(petersen).fraction == 1


@pytest.mark.parametrize("n", range(3, 11))
def test_complete_graphs(n):
    assert cheeger_exact(complete_graph(n)).fraction == n - n // 2


@pytest.mark.parametrize("n", range(3, 13))
def test_cycles(n):
    assert cheeger_exact(cycle_graph(n)).fraction == Fraction(2, n // 2)


def test_witness_reproduces_numerator():
    for stream in range(20):
        g = generate_regular(12, 3, Seed(9, stream))
        result = cheeger_exact(g)
        assert 1 <= result.denominator <= g.n // 2
        assert len(result.witness) == result.denominator
        assert boundary_size(g, result.witness_mask) == result.numerator
        assert result.h > 0


def test_matches_naive_on_random_graphs():
    for n, k in [(6, 3), (8, 3), (9, 4), (10, 5), (12, 4), (14, 3)]:
        for stream in range(6):
            g = generate_regular(n, k, Seed(21, stream))
            assert cheeger_exact(g).fraction == cheeger_naive(g).fraction


def test_parallel_blocks_match_serial():
    for stream in range(4):
        g = generate_regular(16, 3, Seed(2, stream))
        serial = cheeger_exact(g)
        parallel = cheeger_exact(g, workers=3)
        assert parallel == serial


def test_gray_trace_matches_recomputed_boundary():
    g = generate_regular(10, 3, Seed(4))
    steps = [0, 1, 2, 3, 7, 100, 511, 1023]
    for mask, b in gray_boundary_trace(g, steps):
        assert b == boundary_size(g, mask)
    assert gray_boundary_trace(g, [0]) == [(0, 0)]


def test_gray_trace_at_random_checkpoints():
    g = generate_regular(16, 5, Seed(9))
    rng = np.random.default_rng(9)
    steps = rng.choice(1 << g.n, size=1000, replace=False).tolist()
    trace = gray_boundary_trace(g, steps)
    assert len(trace) == 1000
    for mask, b in trace:
        assert b == boundary_size(g, mask)


def test_disconnected_graph_rejected():
    triangles = Graph.from_edges(6, [(0, 1), (1, 2), (2, 0), (3, 4), (4, 5), (5, 3)], k=2)
    with pytest.raises(NotConnectedError):
        cheeger_exact(triangles)
    with pytest.raises(NotConnectedError):
        cheeger_naive(triangles)


def test_size_caps():
    with pytest.raises(TooLargeError):
        cheeger_exact(cycle_graph(41))
    with pytest.raises(TooLargeError):
        cheeger_naive(cycle_graph(17))
