from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from cheeger_lab.cheeger import NAIVE_MAX_N, boundary_size, cheeger_exact, cheeger_naive, gray_boundary_trace
from cheeger_lab.errors import InvalidParametersError
from cheeger_lab.graph import Graph, Seed, complete_graph, cycle_graph, generate_regular, petersen_graph
from cheeger_lab.spectral import spectrum, spectrum_checks

logger = logging.getLogger(__name__)

ORACLE_MIN_N = 6
ORACLE_MAX_N = 14
SPECTRUM_TOL = 1e-8
TRACE_STEPS = 64


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class VerifyResult:
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.checks)

    @property
    def failures(self) -> list[CheckResult]:
        return [c for c in self.checks if not c.ok]

    def add(self, name: str, ok: bool, detail: str = "") -> None:
        self.checks.append(CheckResult(name, ok, detail))
        if not ok:
            logger.error(f"verify {name}: FAILED {detail}")


def _sample_parameters(rng: np.random.Generator, max_n: int) -> tuple[int, int]:
    while True:
        n = int(rng.integers(ORACLE_MIN_N, max_n + 1))
        k = int(rng.integers(3, n - 1)) if n > 4 else 3
        if (n * k) % 2 == 0 and k < n:
            return n, k


def _oracle_sweep(result: VerifyResult, max_n: int, samples: int, seed: Seed) -> None:
    rng = seed.rng(0)
    mismatches = []
    spectrum_problems = []
    for i in range(samples):
        n, k = _sample_parameters(rng, max_n)
        g = generate_regular(n, k, seed.child(i + 1))
        exact = cheeger_exact(g)
        naive = cheeger_naive(g)
        if exact.fraction != naive.fraction:
            mismatches.append(f"sample {i} (n={n}, k={k}): exact {exact.fraction} != naive {naive.fraction}")
        elif boundary_size(g, exact.witness_mask) != exact.numerator or len(exact.witness) != exact.denominator:
            mismatches.append(f"sample {i} (n={n}, k={k}): witness does not attain {exact.fraction}")
        problems = spectrum_checks(spectrum(g), k)
        if problems:
            spectrum_problems.append(f"sample {i}: {'; '.join(problems)}")
    result.add("oracle-equivalence", not mismatches, "; ".join(mismatches[:3]) or f"{samples} graphs agree")
    result.add("spectrum-invariants", not spectrum_problems, "; ".join(spectrum_problems[:3]))


def _known_values(result: VerifyResult, max_n: int) -> None:
    k4 = cheeger_exact(complete_graph(4)).fraction
    result.add("h(K4)", k4 == 2, f"got {k4}")

    bad = []
    for n in range(3, min(10, max_n) + 1):
        h = cheeger_exact(complete_graph(n)).fraction
        if h != n - n // 2:
            bad.append(f"K{n}: {h}")
    result.add("h(Kn)", not bad, "; ".join(bad))

    bad = []
    for n in range(3, min(12, max_n) + 1):
        h = cheeger_exact(cycle_graph(n)).fraction
        if h != Fraction(2, n // 2):
            bad.append(f"C{n}: {h}")
    result.add("h(Cn)", not bad, "; ".join(bad))

    petersen = petersen_graph()
    exact = cheeger_exact(petersen).fraction
    naive = cheeger_naive(petersen).fraction
    result.add("h(Petersen)", exact == naive == 1, f"exact {exact}, naive {naive}")


def _closed_form_spectra(result: VerifyResult) -> None:
    expected: dict[str, tuple[Graph, list[float]]] = {
        "K4": (complete_graph(4), [3.0, -1.0, -1.0, -1.0]),
        "C6": (cycle_graph(6), sorted((2.0 * math.cos(2.0 * math.pi * j / 6) for j in range(6)), reverse=True)),
        "Petersen": (petersen_graph(), [3.0] + [1.0] * 5 + [-2.0] * 4),
    }
    for name, (g, values) in expected.items():
        got = np.asarray(spectrum(g).values)
        err = float(np.max(np.abs(got - np.asarray(values))))
        result.add(f"spectrum({name})", err <= SPECTRUM_TOL, f"max error {err:.2e}")


def _gray_trace_check(result: VerifyResult, seed: Seed) -> None:
    g = generate_regular(12, 3, seed.child(0))
    steps = list(range(TRACE_STEPS)) + [(1 << g.n) - 1]
    bad = [
        f"step {step}: incremental {b} != {boundary_size(g, mask)}"
        for step, (mask, b) in zip(steps, gray_boundary_trace(g, steps))
        if b != boundary_size(g, mask)
    ]
    result.add("gray-trace", not bad, "; ".join(bad[:3]))


def run_verify(max_n: int = 12, samples: int = 200, master_seed: int = 7) -> VerifyResult:
    """Oracle-equivalence sweep, known exact values and spectrum invariants."""

    if not ORACLE_MIN_N <= max_n <= min(ORACLE_MAX_N, NAIVE_MAX_N):
        raise InvalidParametersError(f"max_n must lie in {ORACLE_MIN_N}..{ORACLE_MAX_N}, got {max_n}")
    if samples < 1:
        raise InvalidParametersError(f"samples must be >= 1, got {samples}")

    seed = Seed(master_seed)
    result = VerifyResult()
    _oracle_sweep(result, max_n, samples, seed)
    _known_values(result, max_n)
    _closed_form_spectra(result)
    _gray_trace_check(result, seed)
    logger.info(f"verify: {len(result.checks) - len(result.failures)}/{len(result.checks)} checks passed")
    return result
