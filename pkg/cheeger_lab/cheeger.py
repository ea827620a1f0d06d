from __future__ import annotations

import logging
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np
from joblib import Parallel, delayed
from numba import njit

from cheeger_lab.errors import InvalidParametersError, NotConnectedError, TooLargeError
from cheeger_lab.graph import Graph, is_connected, validate

logger = logging.getLogger(__name__)

EXACT_MAX_N = 40
NAIVE_MAX_N = 16


@dataclass(frozen=True)
class CheegerResult:
    """h(G) = numerator / denominator, attained by the vertex set `witness`."""

    numerator: int
    denominator: int
    witness: tuple[int, ...]

    @property
    def h(self) -> float:
        return self.numerator / self.denominator

    @property
    def fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    @property
    def witness_mask(self) -> int:
        mask = 0
        for v in self.witness:
            mask |= 1 << v
        return mask


def boundary_size(g: Graph, mask: int) -> int:
    """|dF| for F given as a vertex bitset, recomputed from scratch."""

    total = 0
    v = 0
    rest = mask
    while rest:
        if rest & 1:
            total += (g.adjacency[v] & ~mask).bit_count()
        rest >>= 1
        v += 1
    return total


def _mask_to_vertices(mask: int) -> tuple[int, ...]:
    return tuple(v for v in range(mask.bit_length()) if (mask >> v) & 1)


def _check_solvable(g: Graph, cap: int) -> None:
    if g.n > cap:
        raise TooLargeError(f"n={g.n} exceeds the enumeration cap of {cap}")
    problems = validate(g)
    if problems:
        raise InvalidParametersError(f"invalid graph: {'; '.join(problems)}")
    if not is_connected(g):
        raise NotConnectedError(f"graph on {g.n} vertices is not connected")


@njit(cache=True, nogil=True)
def _gray_block(nbrs, n, k, start, stop):
    # Walk Gray codes g(i) = i ^ (i >> 1) for start <= i < stop, keeping |F|,
    # |dF| and per-vertex neighbour counts in F up to date one toggle at a time.
    half = n // 2
    mask = start ^ (start >> 1)
    in_f = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    size = 0
    for v in range(n):
        if (mask >> v) & 1:
            in_f[v] = 1
            size += 1
            for j in range(k):
                cnt[nbrs[v, j]] += 1
    boundary = 0
    for v in range(n):
        if in_f[v] == 1:
            boundary += k - cnt[v]

    best_num = -1
    best_den = 1
    best_mask = 0
    for i in range(start, stop):
        if size >= 1 and size <= half:
            if best_num < 0 or boundary * best_den < best_num * size:
                best_num = boundary
                best_den = size
                best_mask = mask
        nxt = i + 1
        if nxt >= stop:
            break
        v = 0
        while ((nxt >> v) & 1) == 0:
            v += 1
        if in_f[v] == 1:
            in_f[v] = 0
            size -= 1
            boundary += 2 * cnt[v] - k
            for j in range(k):
                cnt[nbrs[v, j]] -= 1
        else:
            in_f[v] = 1
            size += 1
            boundary += k - 2 * cnt[v]
            for j in range(k):
                cnt[nbrs[v, j]] += 1
        mask ^= np.int64(1) << v
    return best_num, best_den, best_mask


@njit(cache=True)
def _gray_trace(nbrs, n, k, checkpoints):
    # Incremental |dF| sampled at sorted Gray-walk step indices.
    out_masks = np.zeros(checkpoints.shape[0], dtype=np.int64)
    out_boundary = np.zeros(checkpoints.shape[0], dtype=np.int64)
    in_f = np.zeros(n, dtype=np.int64)
    cnt = np.zeros(n, dtype=np.int64)
    mask = np.int64(0)
    boundary = 0
    c = 0
    last = checkpoints[checkpoints.shape[0] - 1] if checkpoints.shape[0] else -1
    i = 0
    while i <= last:
        while c < checkpoints.shape[0] and checkpoints[c] == i:
            out_masks[c] = mask
            out_boundary[c] = boundary
            c += 1
        if i == last:
            break
        nxt = i + 1
        v = 0
        while ((nxt >> v) & 1) == 0:
            v += 1
        if in_f[v] == 1:
            in_f[v] = 0
            boundary += 2 * cnt[v] - k
            for j in range(k):
                cnt[nbrs[v, j]] -= 1
        else:
            in_f[v] = 1
            boundary += k - 2 * cnt[v]
            for j in range(k):
                cnt[nbrs[v, j]] += 1
        mask ^= np.int64(1) << v
        i += 1
    return out_masks, out_boundary


def gray_boundary_trace(g: Graph, steps: list[int]) -> list[tuple[int, int]]:
    """(mask, incrementally maintained |dF|) at the given Gray-walk steps."""

    if g.n > EXACT_MAX_N:
        raise TooLargeError(f"n={g.n} exceeds the enumeration cap of {EXACT_MAX_N}")
    ordered = np.array(sorted(steps), dtype=np.int64)
    if ordered.size and (ordered[0] < 0 or ordered[-1] >= (1 << g.n)):
        raise InvalidParametersError(f"steps must lie in 0..{(1 << g.n) - 1}")
    masks, boundaries = _gray_trace(g.neighbor_table(), g.n, g.k, ordered)
    return [(int(m), int(b)) for m, b in zip(masks, boundaries)]


def _block_bounds(total: int, blocks: int) -> list[tuple[int, int]]:
    step = -(-total // blocks)
    return [(lo, min(lo + step, total)) for lo in range(0, total, step)]


def cheeger_exact(g: Graph, workers: int = 1) -> CheegerResult:
    """Exact Cheeger constant by a Gray-code walk over all vertex subsets.

    With workers > 1 the walk is cut into contiguous blocks solved in parallel;
    blocks are reduced in walk order so ties resolve exactly as in a serial run.
    """

    _check_solvable(g, EXACT_MAX_N)
    nbrs = g.neighbor_table()
    total = 1 << g.n

    if workers <= 1:
        parts = [_gray_block(nbrs, g.n, g.k, 0, total)]
    else:
        bounds = _block_bounds(total, workers * 4)
        parts = Parallel(n_jobs=workers, prefer="threads")(
            delayed(_gray_block)(nbrs, g.n, g.k, lo, hi) for lo, hi in bounds
        )

    best_num, best_den, best_mask = -1, 1, 0
    for num, den, mask in parts:
        num, den, mask = int(num), int(den), int(mask)
        if num < 0:
            continue
        if best_num < 0 or num * best_den < best_num * den:
            best_num, best_den, best_mask = num, den, mask

    result = CheegerResult(best_num, best_den, _mask_to_vertices(best_mask))
    logger.debug(f"cheeger_exact n={g.n} k={g.k}: h={result.fraction} witness={result.witness}")
    return result


def cheeger_naive(g: Graph) -> CheegerResult:
    """Reference solver: recompute |dF| from scratch for every subset."""

    _check_solvable(g, NAIVE_MAX_N)
    best: tuple[int, int, int] | None = None
    for size in range(1, g.n // 2 + 1):
        for subset in combinations(range(g.n), size):
            mask = 0
            for v in subset:
                mask |= 1 << v
            b = boundary_size(g, mask)
            if best is None or b * best[1] < best[0] * size:
                best = (b, size, mask)
    assert best is not None
    return CheegerResult(best[0], best[1], _mask_to_vertices(best[2]))
