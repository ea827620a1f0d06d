from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from cheeger_lab.errors import GenerationExhaustedError, InvalidParametersError

logger = logging.getLogger(__name__)

# Vertex sets are single-word bitsets.
MAX_VERTICES = 64
DEFAULT_MAX_RESTARTS = 10_000
_UINT64_MAX = (1 << 64) - 1

# Failed draws tolerated before checking whether any legal pair is left.
_STALL_CHECK = 32


@dataclass(frozen=True)
class Seed:
    """(master, stream-index) pair; every random draw in the toolkit derives from one."""

    master: int
    stream: int = 0

    def __post_init__(self) -> None:
        for name, value in (("master", self.master), ("stream", self.stream)):
            if not 0 <= int(value) <= _UINT64_MAX:
                raise InvalidParametersError(f"seed {name}={value} is not a 64-bit unsigned integer")

    def rng(self, substream: int = 0) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence([self.master, self.stream, substream]))

    def child(self, stream: int) -> "Seed":
        return Seed(self.master, stream)


@dataclass(frozen=True)
class Graph:
    """Simple undirected graph on vertices 0..n-1 claimed to be k-regular.

    adjacency[v] is an int bitset of v's neighbours. Construction does not
    enforce the invariants; use validate() for that.
    """

    n: int
    k: int
    adjacency: tuple[int, ...]

    @classmethod
    def from_edges(cls, n: int, edges: Iterable[tuple[int, int]], k: int | None = None) -> "Graph":
        adj = [0] * n
        for u, v in edges:
            if not (0 <= u < n and 0 <= v < n):
                raise InvalidParametersError(f"edge ({u}, {v}) outside vertex range 0..{n - 1}")
            adj[u] |= 1 << v
            adj[v] |= 1 << u
        if k is None:
            k = adj[0].bit_count() if n else 0
        return cls(n, k, tuple(adj))

    def degree(self, v: int) -> int:
        return self.adjacency[v].bit_count()

    def neighbors(self, v: int) -> list[int]:
        return _bits(self.adjacency[v])

    def edges(self) -> list[tuple[int, int]]:
        return [(u, v) for u in range(self.n) for v in self.neighbors(u) if u < v]

    @property
    def edge_count(self) -> int:
        return sum(self.degree(v) for v in range(self.n)) // 2

    def to_adjacency_matrix(self) -> np.ndarray:
        a = np.zeros((self.n, self.n), dtype=np.float64)
        for u, v in self.edges():
            a[u, v] = 1.0
            a[v, u] = 1.0
        return a

    def neighbor_table(self) -> np.ndarray:
        """(n, k) int64 array of neighbour indices; requires regularity."""
        table = np.empty((self.n, self.k), dtype=np.int64)
        for v in range(self.n):
            nbrs = self.neighbors(v)
            if len(nbrs) != self.k:
                raise InvalidParametersError(f"vertex {v} has degree {len(nbrs)}, expected {self.k}")
            table[v, :] = nbrs
        return table


def _bits(mask: int) -> list[int]:
    out = []
    while mask:
        low = mask & -mask
        out.append(low.bit_length() - 1)
        mask ^= low
    return out


def check_parameters(n: int, k: int) -> None:
    if n < 3:
        raise InvalidParametersError(f"n={n}: need at least 3 vertices")
    if n > MAX_VERTICES:
        raise InvalidParametersError(f"n={n}: vertex sets are limited to {MAX_VERTICES} vertices")
    if not 2 <= k <= n - 1:
        raise InvalidParametersError(f"k={k} out of range 2..{n - 1} for n={n}")
    if (n * k) % 2:
        raise InvalidParametersError(f"n*k = {n}*{k} is odd; no {k}-regular graph on {n} vertices")


def is_connected(g: Graph) -> bool:
    if g.n == 0:
        return True
    full = (1 << g.n) - 1
    seen = 1
    frontier = 1
    while frontier:
        reached = 0
        for v in _bits(frontier):
            reached |= g.adjacency[v]
        frontier = reached & ~seen & full
        seen |= frontier
    return seen == full


def validate(g: Graph) -> list[str]:
    """Return one description per violated Graph invariant (empty when valid)."""

    violations: list[str] = []
    if g.n < 3 or not 2 <= g.k <= g.n - 1:
        violations.append(f"parameters: n={g.n}, k={g.k} outside 3 <= n, 2 <= k <= n-1")
    if (g.n * g.k) % 2:
        violations.append(f"parity: n*k = {g.n * g.k} is odd")
    if len(g.adjacency) != g.n:
        violations.append(f"shape: {len(g.adjacency)} adjacency rows for n={g.n}")
        return violations

    full = (1 << g.n) - 1
    for v, mask in enumerate(g.adjacency):
        if mask < 0 or mask & ~full:
            violations.append(f"range: vertex {v} lists neighbours outside 0..{g.n - 1}")
            mask &= full
        if (mask >> v) & 1:
            violations.append(f"self-loop: vertex {v}")
        degree = mask.bit_count()
        if degree != g.k:
            violations.append(f"regularity: vertex {v} has degree {degree}, expected {g.k}")
        for u in _bits(mask):
            if u != v and not (g.adjacency[u] >> v) & 1:
                violations.append(f"symmetry: edge {v}->{u} present but {u}->{v} missing")

    degree_sum = sum((mask & full).bit_count() for mask in g.adjacency)
    if degree_sum != g.n * g.k:
        violations.append(f"edge-count: degree sum {degree_sum} != n*k = {g.n * g.k}")
    return violations


def _pair_points(n: int, k: int, rng: np.random.Generator) -> list[int] | None:
    """One pass of the pairing model; None when the matching hits a dead end."""

    points = [v for v in range(n) for _ in range(k)]
    adj = [0] * n
    failures = 0
    while points:
        m = len(points)
        i = int(rng.integers(m))
        j = int(rng.integers(m - 1))
        if j >= i:
            j += 1
        u, v = points[i], points[j]
        if u != v and not (adj[u] >> v) & 1:
            adj[u] |= 1 << v
            adj[v] |= 1 << u
            for idx in sorted((i, j), reverse=True):
                points[idx] = points[-1]
                points.pop()
            failures = 0
            continue

        failures += 1
        if failures >= _STALL_CHECK:
            if not _has_legal_pair(points, adj):
                return None
            failures = 0
    return adj


def _has_legal_pair(points: list[int], adj: list[int]) -> bool:
    remaining = sorted(set(points))
    for a, u in enumerate(remaining):
        for v in remaining[a + 1 :]:
            if not (adj[u] >> v) & 1:
                return True
    return False


def generate_regular(
    n: int,
    k: int,
    seed: Seed,
    max_restarts: int = DEFAULT_MAX_RESTARTS,
) -> Graph:
    """Random connected simple k-regular graph on n vertices, pure in (n, k, seed).

    Half-edge points are matched by uniform random draws, rejecting loops and
    repeated edges. A dead end or a disconnected result restarts the whole
    matching on the next substream of the seed.
    """

    check_parameters(n, k)
    for restart in range(max_restarts + 1):
        adj = _pair_points(n, k, seed.rng(restart))
        if adj is None:
            continue
        g = Graph(n, k, tuple(adj))
        if is_connected(g):
            if restart:
                logger.debug(f"generate_regular(n={n}, k={k}, seed={seed}) succeeded after {restart} restarts")
            return g
    raise GenerationExhaustedError(
        f"no connected {k}-regular graph on {n} vertices after {max_restarts} restarts (seed={seed})"
    )


def complete_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(u, v) for u in range(n) for v in range(u + 1, n)], k=n - 1)


def cycle_graph(n: int) -> Graph:
    return Graph.from_edges(n, [(v, (v + 1) % n) for v in range(n)], k=2)


def petersen_graph() -> Graph:
    outer = [(v, (v + 1) % 5) for v in range(5)]
    spokes = [(v, v + 5) for v in range(5)]
    inner = [(5 + v, 5 + (v + 2) % 5) for v in range(5)]
    return Graph.from_edges(10, outer + spokes + inner, k=3)


def read_edge_list(path: Path, k: int | None = None) -> Graph:
    """Parse 'u v' lines (0-indexed); blank lines and '#' comments are skipped."""

    edges: list[tuple[int, int]] = []
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        parts = stripped.split()
        if len(parts) != 2:
            raise InvalidParametersError(f"{path}:{lineno}: expected 'u v', got {line!r}")
        try:
            edges.append((int(parts[0]), int(parts[1])))
        except ValueError as exc:
            raise InvalidParametersError(f"{path}:{lineno}: non-integer vertex in {line!r}") from exc
    if not edges:
        raise InvalidParametersError(f"{path}: no edges found")
    n = max(max(u, v) for u, v in edges) + 1
    return Graph.from_edges(n, edges, k=k)
