"""Packing and covering of finite pools, and Maurey's empirical method on the l1-ball."""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import NotInBall, PoolTooLarge, TooLarge
from .rng import Pcg32, as_seed, substream

Metric = Callable[[np.ndarray, np.ndarray], float]

MAX_COVER_POOL = 20
MAX_NET_MULTISETS = 10 ** 6


def euclidean(a, b) -> float:
    return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))


def distance_matrix(pool: Sequence, metric: Metric | None = None) -> np.ndarray:
    pts = [np.atleast_1d(np.asarray(p, dtype=float)) for p in pool]
    m = len(pts)
    if metric is None or metric is euclidean:
        P = np.vstack(pts)
        diff = P[:, None, :] - P[None, :, :]
        return np.sqrt((diff ** 2).sum(axis=-1))
    D = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            D[i, j] = D[j, i] = metric(pts[i], pts[j])
    return D


@dataclass
class PackingResult:
    epsilon: float
    points: list
    count: int
    indices: list


def greedy_packing(pool: Sequence, metric: Metric | None = None, epsilon: float = 1.0,
                   distances: np.ndarray | None = None) -> PackingResult:
    """Scan the pool in order and keep a point iff it is > epsilon from every kept point."""
    if len(pool) == 0:
        raise ValueError("pool must be non-empty")
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    D = distance_matrix(pool, metric) if distances is None else distances
    kept = _greedy_indices(D, epsilon)
    return PackingResult(epsilon, [pool[i] for i in kept], len(kept), kept)


def _greedy_indices(D: np.ndarray, epsilon: float, seed_indices=()) -> list[int]:
    kept = list(seed_indices)
    for i in range(D.shape[0]):
        if i in kept:
            continue
        if not kept or np.all(D[i, kept] > epsilon):
            kept.append(i)
    return kept


def packing_curve(D: np.ndarray, epsilons) -> np.ndarray:
    return np.array([len(_greedy_indices(D, e)) for e in epsilons])


def brute_min_cover(pool: Sequence, metric: Metric | None = None, epsilon: float = 1.0,
                    distances: np.ndarray | None = None) -> int:
    """Exact minimum number of closed epsilon-balls centred at pool points covering the pool."""
    m = len(pool)
    if m == 0:
        raise ValueError("pool must be non-empty")
    if m > MAX_COVER_POOL:
        raise PoolTooLarge(f"pool of {m} points exceeds the exhaustive limit {MAX_COVER_POOL}")
    D = distance_matrix(pool, metric) if distances is None else distances
    return min_cover_size(D, epsilon)


def min_cover_size(D: np.ndarray, epsilon: float) -> int:
    m = D.shape[0]
    balls = [sum(1 << j for j in range(m) if D[i, j] <= epsilon) for i in range(m)]
    full = (1 << m) - 1
    # the greedy packing is a cover, so its size is a valid initial incumbent
    best = [len(_greedy_indices(D, epsilon))]

    def search(covered: int, used: int):
        if covered == full:
            best[0] = min(best[0], used)
            return
        if used + 1 >= best[0]:
            return
        first = (~covered & full & -(~covered & full)).bit_length() - 1
        for i in range(m):
            if balls[i] >> first & 1:
                search(covered | balls[i], used + 1)

    search(0, 0)
    return best[0]


def write_packing_csv(results: Sequence[PackingResult], fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["epsilon", "count"])
    for r in results:
        w.writerow([repr(float(r.epsilon)), r.count])


def _check_ball(theta: np.ndarray, M: float):
    if M <= 0:
        raise ValueError("M must be positive")
    s = float(np.abs(theta).sum())
    if s > M * (1 + 1e-12) + 1e-15:
        raise NotInBall(f"||theta||_1 = {s:.6g} exceeds M = {M:.6g}")


def symbol_probabilities(theta, M: float) -> np.ndarray:
    """P(Y = symbol) for symbols e_1..e_l, -e_l..-e_1, then the zero vector."""
    theta = np.asarray(theta, dtype=float)
    _check_ball(theta, M)
    pos = np.maximum(theta, 0.0) / M
    neg = np.maximum(-theta, 0.0)[::-1] / M
    p = np.concatenate([pos, neg])
    return np.append(p, max(0.0, 1.0 - p.sum()))


def _symbols_to_vector(symbols: np.ndarray, l: int, M: float, k: int) -> np.ndarray:
    counts = np.bincount(symbols, minlength=2 * l + 1)
    coef = counts[:l] - counts[l:2 * l][::-1]
    return M * coef / k


def maurey_sparsify(theta, M: float, k: int, seed) -> np.ndarray:
    """Average of k i.i.d. signed vertices (or zero) with mean theta, times M.

    The result has at most k nonzero coordinates, each a multiple of M/k.
    """
    if k < 1:
        raise ValueError("k must be positive")
    theta = np.asarray(theta, dtype=float)
    p = symbol_probabilities(theta, M)
    cdf = np.cumsum(p)
    cdf[-1] = 1.0
    u = Pcg32(as_seed(seed)).uniform(k)
    symbols = np.minimum(np.searchsorted(cdf, u, side="right"), p.size - 1)
    return _symbols_to_vector(symbols, theta.size, M, k)


def maurey_k(n: int, M: float, A: float, epsilon: float) -> int:
    return math.ceil(4 * n * M ** 2 * A ** 2 / epsilon ** 2)


def maurey_cover_bound(n: int, l: int, M: float, A: float, epsilon: float, mode: str = "cover") -> float:
    """Log of the covering (or packing) bound for the l1-ball under d.

    ``cover``:    (e + e l eps^2 / (2 n M^2 A^2)) ** (4 n M^2 A^2 / eps^2 + 1)
    ``packing``:  (e + e l eps^2 / (8 n M^2 A^2)) ** (16 n M^2 A^2 / eps^2 + 1)
    ``binomial``: C(2l + k - 1, k) with k = ceil(4 n M^2 A^2 / eps^2)
    """
    if min(n, l, M, A, epsilon) <= 0:
        raise ValueError("all arguments must be positive")
    s = n * M ** 2 * A ** 2
    e = math.e
    if mode == "cover":
        return (4 * s / epsilon ** 2 + 1) * math.log(e + e * l * epsilon ** 2 / (2 * s))
    if mode == "packing":
        return (16 * s / epsilon ** 2 + 1) * math.log(e + e * l * epsilon ** 2 / (8 * s))
    if mode == "binomial":
        k = maurey_k(n, M, A, epsilon)
        return math.lgamma(2 * l + k) - math.lgamma(k + 1) - math.lgamma(2 * l)
    raise ValueError(f"unknown mode {mode!r}")


def multiset_counts(l: int, k: int) -> tuple[int, int]:
    """(realizations over 2l+1 symbols incl. zero, the count C(2l+k-1, k) over 2l symbols)."""
    return math.comb(2 * l + k, k), math.comb(2 * l + k - 1, k)


def maurey_net(l: int, M: float, k: int) -> list[np.ndarray]:
    """All distinct values of M * mean(Y_1..Y_k) over signed vertices and zero."""
    total, _ = multiset_counts(l, k)
    if total > MAX_NET_MULTISETS:
        raise TooLarge(f"{total} multisets exceed the enumeration guard {MAX_NET_MULTISETS}")
    seen = {}
    for combo in itertools.combinations_with_replacement(range(2 * l + 1), k):
        coef = np.zeros(l, dtype=np.int64)
        for s in combo:
            if s < l:
                coef[s] += 1
            elif s < 2 * l:
                coef[2 * l - 1 - s] -= 1
        key = coef.tobytes()
        if key not in seen:
            seen[key] = M * coef / k
    return list(seen.values())


def l1_ball_pool(l: int, M: float, size: int, seed, include_vertices: bool = True) -> list[np.ndarray]:
    """Explicit pool in the l1-ball: signed vertices, zero, then scaled Dirichlet points."""
    pool = []
    if include_vertices:
        pool.append(np.zeros(l))
        for j in range(l):
            for s in (1.0, -1.0):
                v = np.zeros(l)
                v[j] = s * M
                pool.append(v)
    g = Pcg32(substream(as_seed(seed), 11))
    while len(pool) < size:
        w = -np.log(1.0 - g.uniform(l))
        signs = g.signs(l)
        radius = g.uniform(1)[0]
        pool.append(M * radius * signs * w / w.sum())
    return pool[:size]
