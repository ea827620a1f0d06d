from __future__ import annotations

import math

import numpy as np
import pytest

from cheeger_lab.errors import DegenerateSpectrumError, InvalidParametersError
from cheeger_lab.graph import Seed, cycle_graph, generate_regular
from cheeger_lab.spectral import Spectrum, spectral_gap, spectrum, spectrum_checks, symmetric_eigenvalues


def test_k4_spectrum(k4):
    assert spectrum(k4).values == pytest.approx((3.0, -1.0, -1.0, -1.0), abs=1e-8)


def test_c6_spectrum(c6):
    assert spectrum(c6).values == pytest.approx((2.0, 1.0, 1.0, -1.0, -1.0, -2.0), abs=1e-8)


def test_petersen_spectrum(petersen):
    expected = (3.0,) + (1.0,) * 5 + (-2.0,) * 4
    assert spectrum(petersen).values == pytest.approx(expected, abs=1e-8)


@pytest.mark.parametrize("n", [5, 7, 8, 11])
def test_cycle_spectrum_closed_form(n):
    expected = sorted((2.0 * math.cos(2.0 * math.pi * j / n) for j in range(n)), reverse=True)
    assert spectrum(cycle_graph(n)).values == pytest.approx(expected, abs=1e-8)


def test_spectral_gap_examples(k4, c6, petersen):
    assert spectral_gap(spectrum(k4), 3) == pytest.approx(4.0)
    assert spectral_gap(spectrum(c6), 2) == pytest.approx(1.0)
    assert spectral_gap(spectrum(petersen), 3) == pytest.approx(2.0)


def test_spectral_gap_needs_two_values():
    with pytest.raises(DegenerateSpectrumError):
        spectral_gap(Spectrum((3.0,)), 3)


def test_jacobi_matches_numpy_on_random_graphs():
    for stream in range(10):
        g = generate_regular(18, 5, Seed(11, stream))
        ours = np.asarray(spectrum(g).values)
        ref = np.sort(np.linalg.eigvalsh(g.to_adjacency_matrix()))[::-1]
        assert np.max(np.abs(ours - ref)) < 1e-8


def test_random_spectra_pass_invariant_checks():
    for stream in range(10):
        g = generate_regular(14, 4, Seed(5, stream))
        s = spectrum(g)
        assert spectrum_checks(s, 4) == []
        assert list(s.values) == sorted(s.values, reverse=True)


def test_spectrum_checks_flags_bad_perron():
    problems = spectrum_checks(Spectrum((2.5, 0.5, -1.5, -1.5)), 3)
    assert any(p.startswith("perron:") for p in problems)


def test_prefix_bounds(petersen):
    s = spectrum(petersen)
    assert s.prefix(2) == pytest.approx((3.0, 1.0))
    with pytest.raises(InvalidParametersError):
        s.prefix(0)
    with pytest.raises(InvalidParametersError):
        s.prefix(11)


def test_symmetric_eigenvalues_rejects_non_square():
    with pytest.raises(InvalidParametersError):
        symmetric_eigenvalues(np.zeros((2, 3)))
