from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit

from cheeger_lab.errors import DegenerateSpectrumError, InvalidParametersError, NoConvergenceError
from cheeger_lab.graph import Graph

DEFAULT_TOL = 1e-10
MAX_SWEEPS = 100

# Invariant tolerances for computed spectra.
TRACE_TOL = 1e-8
PERRON_TOL = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """Adjacency eigenvalues sorted descending."""

    values: tuple[float, ...]

    @property
    def n(self) -> int:
        return len(self.values)

    def prefix(self, m: int) -> tuple[float, ...]:
        if not 1 <= m <= self.n:
            raise InvalidParametersError(f"prefix length {m} outside 1..{self.n}")
        return self.values[:m]

    @property
    def lambda1(self) -> float:
        if self.n < 2:
            raise DegenerateSpectrumError("spectrum has fewer than 2 eigenvalues")
        return self.values[1]


@njit(cache=True)
def _jacobi_sweeps(a, tol, max_sweeps):
    # Cyclic Jacobi on a symmetric matrix, in place. Returns sweeps used or -1.
    n = a.shape[0]
    for sweep in range(max_sweeps + 1):
        off = 0.0
        for i in range(n):
            for j in range(n):
                if i != j:
                    off += a[i, j] * a[i, j]
        if math.sqrt(off) < tol:
            return sweep
        if sweep == max_sweeps:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
                if theta < 0.0:
                    t = -t
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for r in range(n):
                    if r != p and r != q:
                        arp = a[r, p]
                        arq = a[r, q]
                        a[r, p] = c * arp - s * arq
                        a[p, r] = a[r, p]
                        a[r, q] = c * arq + s * arp
                        a[q, r] = a[r, q]
                a[p, p] = a[p, p] - t * apq
                a[q, q] = a[q, q] + t * apq
                a[p, q] = 0.0
                a[q, p] = 0.0
    return -1


def symmetric_eigenvalues(matrix: np.ndarray, tol: float = DEFAULT_TOL) -> tuple[float, ...]:
    """Eigenvalues of a dense symmetric matrix, descending."""

    if tol <= 0:
        raise InvalidParametersError(f"tol must be positive, got {tol}")
    a = np.array(matrix, dtype=np.float64, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise InvalidParametersError(f"expected a square matrix, got shape {a.shape}")
    sweeps = _jacobi_sweeps(a, tol, MAX_SWEEPS)
    if sweeps < 0:
        raise NoConvergenceError(f"Jacobi did not reach off-diagonal norm {tol} in {MAX_SWEEPS} sweeps")
    return tuple(sorted((float(x) for x in np.diag(a)), reverse=True))


def spectrum(g: Graph, tol: float = DEFAULT_TOL) -> Spectrum:
    return Spectrum(symmetric_eigenvalues(g.to_adjacency_matrix(), tol))


def spectral_gap(s: Spectrum, k: int) -> float:
    if s.n < 2:
        raise DegenerateSpectrumError(f"spectral gap needs n >= 2 eigenvalues, got {s.n}")
    return k - s.values[1]


def spectrum_checks(s: Spectrum, k: int, connected: bool = True) -> list[str]:
    """Trace, Frobenius and Perron checks for a k-regular adjacency spectrum."""

    n = s.n
    values = np.asarray(s.values, dtype=np.float64)
    problems: list[str] = []
    if any(values[i] < values[i + 1] for i in range(n - 1)):
        problems.append("order: eigenvalues not sorted descending")
    trace = float(values.sum())
    if abs(trace) > TRACE_TOL * n:
        problems.append(f"trace: sum of eigenvalues {trace:.3e} exceeds {TRACE_TOL * n:.1e}")
    frob = float((values**2).sum())
    if abs(frob - n * k) > TRACE_TOL * n * n:
        problems.append(f"frobenius: sum of squares {frob:.12g} != n*k = {n * k}")
    if connected and n and abs(values[0] - k) > PERRON_TOL:
        problems.append(f"perron: lambda0 = {values[0]:.12g} != k = {k}")
    if n and float(np.max(np.abs(values))) > k + PERRON_TOL:
        problems.append(f"range: an eigenvalue exceeds k = {k} in absolute value")
    return problems
