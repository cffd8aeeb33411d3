"""Suprema of Rademacher processes over the l1-ball.

Linear classes are solved exactly: sup over the ball of |eps^T X theta| is
M * max_j |(X^T eps)_j|, attained at a signed vertex.  Contraction
composites are maximized by Frank-Wolfe from several starts; the result is
a certified lower bound on the supremum.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .design import DesignMatrix
from .errors import NoGradient, TooLarge
from .function_class import CompositeClass, LinearClass, check_rademacher
from .rng import Pcg32, RngSeed, as_seed, substream

MAX_ENUM_N = 20
FW_ITERATIONS = 100
FW_TOL = 1e-10
FW_HALVINGS = 20
TOP_COORDS = 10
RANDOM_STARTS = 5
CHUNK_COLUMNS = 4096

METHODS = ("exact_vertex", "enumeration", "monte_carlo", "frank_wolfe_lower")


@dataclass(frozen=True)
class SupremumEstimate:
    mean: float
    std_error: float
    replicates: int
    method: str
    # True when per-draw suprema are optimizer lower bounds (composites)
    lower_bound: bool = False

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")
        if self.std_error < 0 or self.replicates < 1:
            raise ValueError("std_error must be >= 0 and replicates >= 1")


def exact_sup_linear(design: DesignMatrix, eps, M: float = 1.0) -> tuple[float, int]:
    """(M * max_j |a_j|, argmax j) with a = X^T eps; ties go to the smallest index."""
    eps = check_rademacher(eps)
    a = design.entries.T @ eps
    j = int(np.argmax(np.abs(a)))
    return float(M * abs(a[j])), j


def _linear_draw_values(X: np.ndarray, E: np.ndarray, M: float, direction: str) -> np.ndarray:
    A = E @ X
    if direction == "abs" or direction == "plus" or direction == "minus":
        # the l1-ball is symmetric, so sup X = sup (-X) = sup |X|
        return M * np.abs(A).max(axis=1)
    raise ValueError(f"unknown direction {direction!r}")


def _fw_core(X1, X2, g, E, sigma, z1, z2, M, iterations, tol, history=False):
    """Monotone Frank-Wolfe on columns r: maximize sigma_r * sum_i E_ir g(z1_ir, z2_ir).

    ``z1``/``z2`` hold the linear images X' theta', X'' theta'' of each
    column's iterate; the gap <grad, s - theta> is computed from them, so the
    parameters themselves are never materialized.
    """
    R = E.shape[1]
    z1 = z1.copy()
    z2 = z2.copy()

    def obj(idx, a, b):
        return sigma[idx] * np.einsum("ir,ir->r", E[:, idx], g(a, b))

    all_idx = np.arange(R)
    f = obj(all_idx, z1, z2)
    trace = [f.copy()] if history else None
    active = np.ones(R, dtype=bool)
    for t in range(iterations):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        gu, gv = g.gradient(z1[:, idx], z2[:, idx])
        scale = sigma[idx] * E[:, idx]
        W1 = scale * gu
        W2 = scale * gv
        G1 = X1.T @ W1
        G2 = X2.T @ W2
        cols = np.arange(idx.size)
        j1 = np.abs(G1).argmax(axis=0)
        j2 = np.abs(G2).argmax(axis=0)
        m1 = np.abs(G1[j1, cols])
        m2 = np.abs(G2[j2, cols])
        use1 = m1 >= m2
        gmax = np.where(use1, m1, m2)
        inner = np.einsum("ir,ir->r", W1, z1[:, idx]) + np.einsum("ir,ir->r", W2, z2[:, idx])
        gap = M * gmax - inner
        done = gap <= tol * np.maximum(1.0, np.abs(f[idx]))
        active[idx[done]] = False
        keep = ~done
        idx, cols = idx[keep], cols[keep]
        if idx.size == 0:
            if history:
                trace.append(f.copy())
            continue
        u1 = use1[keep]
        s1 = np.where(u1, M * np.sign(G1[j1[keep], cols]), 0.0) * X1[:, j1[keep]]
        s2 = np.where(u1, 0.0, M * np.sign(G2[j2[keep], cols])) * X2[:, j2[keep]]
        gamma = np.full(idx.size, 2.0 / (t + 2.0))
        pending = np.ones(idx.size, dtype=bool)
        for _ in range(FW_HALVINGS + 1):
            p = np.flatnonzero(pending)
            if p.size == 0:
                break
            gm = gamma[p]
            c1 = (1 - gm) * z1[:, idx[p]] + gm * s1[:, p]
            c2 = (1 - gm) * z2[:, idx[p]] + gm * s2[:, p]
            fn = obj(idx[p], c1, c2)
            ok = fn >= f[idx[p]]
            acc = p[ok]
            z1[:, idx[acc]] = c1[:, ok]
            z2[:, idx[acc]] = c2[:, ok]
            f[idx[acc]] = fn[ok]
            pending[acc] = False
            gamma[p[~ok]] *= 0.5
        # no improving step within the halving budget: stalled
        active[idx[pending]] = False
        if history:
            trace.append(f.copy())
    return f, trace


def _check_gradient(cls: CompositeClass, allow_fd: bool):
    if cls.g.grad is None and not allow_fd:
        raise NoGradient(f"contraction {cls.g.name!r} has no gradient and finite differences are disabled")


def _start_images(cls: CompositeClass, E: np.ndarray, M: float, rand_vertices, top: int):
    """Starting columns for each sign pattern: zero, +-M e_j on top |grad at 0| coords, random vertices.

    Returns (pattern index per column, z1, z2) with both signs handled by the caller.
    """
    X1 = cls.first.entries
    X2 = cls.second.entries
    n, P = E.shape
    l1 = X1.shape[1]
    zeros = np.zeros((n, P))
    gu, gv = cls.g.gradient(zeros, zeros)
    G = np.vstack([X1.T @ (E * gu), X2.T @ (E * gv)])  # (dim, P)
    top = min(top, G.shape[0])
    # stable ordering: largest magnitude first, ties by index
    order = np.argsort(-np.abs(G), axis=0, kind="stable")[:top]
    pat, Z1, Z2 = [np.arange(P)], [zeros], [zeros]

    def vertex(j, s):
        j = np.asarray(j, dtype=int)
        in1 = j < l1
        a = np.where(in1, s * M, 0.0) * X1[:, np.minimum(j, l1 - 1)]
        b = np.where(in1, 0.0, s * M) * X2[:, np.clip(j - l1, 0, X2.shape[1] - 1)]
        return a, b

    for q in range(top):
        for s in (1.0, -1.0):
            a, b = vertex(order[q], s)
            pat.append(np.arange(P))
            Z1.append(a)
            Z2.append(b)
    for rv in rand_vertices:
        # rv: (P, 2) array of (coordinate, sign)
        a, b = vertex(rv[:, 0], rv[:, 1])
        pat.append(np.arange(P))
        Z1.append(a)
        Z2.append(b)
    return np.concatenate(pat), np.hstack(Z1), np.hstack(Z2)


def _random_vertices(g: Pcg32, dim: int, count: int) -> np.ndarray:
    out = np.zeros((count, 2))
    for c in range(count):
        out[c, 0] = g.below(dim)
        out[c, 1] = 1.0 if g.next_u32() >> 31 else -1.0
    return out


def _fw_patterns(cls: CompositeClass, E: np.ndarray, M: float, rand_vertices, *, top: int = TOP_COORDS,
                 iterations: int = FW_ITERATIONS, tol: float = FW_TOL, history: bool = False):
    """Best objective per sign pattern for both signs: arrays (plus, minus) of shape (P,)."""
    pat, z1, z2 = _start_images(cls, E, M, rand_vertices, top)
    R = pat.size
    sigma = np.concatenate([np.ones(R), -np.ones(R)])
    pat2 = np.concatenate([pat, pat])
    f, trace = _fw_core(cls.first.entries, cls.second.entries, cls.g, E[:, pat2], sigma,
                        np.hstack([z1, z1]), np.hstack([z2, z2]), M, iterations, tol, history)
    P = E.shape[1]
    plus = np.full(P, -np.inf)
    minus = np.full(P, -np.inf)
    np.maximum.at(plus, pat, f[:R])
    np.maximum.at(minus, pat, f[R:])
    if history:
        return plus, minus, trace
    return plus, minus


def frank_wolfe_sup(cls: CompositeClass, eps, M: float = 1.0, restarts: int = RANDOM_STARTS,
                    iterations: int = FW_ITERATIONS, seed=RngSeed(0), direction: str = "abs",
                    top: int = TOP_COORDS, allow_fd: bool = True, return_trace: bool = False):
    """Lower bound on sup over the l1-ball of |sum_i eps_i g((x'_i)^T t', (x''_i)^T t'')|.

    ``restarts`` random signed vertices are drawn from ``seed`` in addition to
    the zero start and the +-M e_j starts on the ``top`` coordinates with the
    largest gradient at zero.  ``direction`` selects sup |X|, sup X or sup -X.
    """
    _check_gradient(cls, allow_fd)
    eps = check_rademacher(eps)
    g = Pcg32(as_seed(seed))
    rv = [v[None, :] for v in _random_vertices(g, cls.dim, restarts)]
    out = _fw_patterns(cls, eps[:, None], M, rv, top=top, iterations=iterations, history=return_trace)
    plus, minus = float(out[0][0]), float(out[1][0])
    value = {"abs": max(plus, minus), "plus": plus, "minus": minus}[direction]
    if return_trace:
        return value, out[2]
    return value


def all_sign_patterns(n: int) -> np.ndarray:
    if n > MAX_ENUM_N:
        raise TooLarge(f"enumeration of 2^{n} sign vectors exceeds the limit 2^{MAX_ENUM_N}")
    return np.array(list(itertools.product((-1.0, 1.0), repeat=n)))


def pattern_suprema(cls, M: float, E: np.ndarray, seed=RngSeed(0), restarts: int = RANDOM_STARTS,
                    iterations: int = FW_ITERATIONS) -> tuple[np.ndarray, np.ndarray]:
    """(sup X, sup -X) per row of ``E``; restart vertices are shared by all rows."""
    if isinstance(cls, LinearClass):
        v = _linear_draw_values(cls.design.entries, E, M, "abs")
        return v, v.copy()
    g = Pcg32(as_seed(seed))
    shared = _random_vertices(g, cls.dim, restarts)
    plus = np.empty(E.shape[0])
    minus = np.empty(E.shape[0])
    starts = 1 + 2 * min(TOP_COORDS, cls.dim) + restarts
    step = max(1, CHUNK_COLUMNS // starts)
    for a in range(0, E.shape[0], step):
        chunk = E[a:a + step].T
        rv = [np.tile(v, (chunk.shape[1], 1)) for v in shared]
        plus[a:a + step], minus[a:a + step] = _fw_patterns(cls, chunk, M, rv, iterations=iterations)
    return plus, minus


def _pick(plus, minus, direction):
    if direction == "abs":
        return np.maximum(plus, minus)
    if direction == "plus":
        return plus
    if direction == "minus":
        return minus
    raise ValueError(f"unknown direction {direction!r}")


def exact_esup_small(cls, M: float = 1.0, direction: str = "abs", seed=RngSeed(0)) -> SupremumEstimate:
    """Average of the per-pattern supremum over all 2^n sign vectors."""
    E = all_sign_patterns(cls.n)
    plus, minus = pattern_suprema(cls, M, E, seed)
    vals = _pick(plus, minus, direction)
    return SupremumEstimate(math.fsum(vals) / vals.size, 0.0, vals.size, "enumeration",
                            lower_bound=isinstance(cls, CompositeClass))


def anchor_abs(cls, theta0, M: float = 1.0) -> float:
    """E |X_theta0| by exact enumeration over all sign vectors."""
    E = all_sign_patterns(cls.n)
    phi = cls.evaluate(theta0)
    return math.fsum(np.abs(E @ phi)) / E.shape[0]


def replicate_signs(n: int, replicates: int, seed) -> np.ndarray:
    """Row r holds the signs of replicate r, drawn from sub-stream (seed, r)."""
    seed = as_seed(seed)
    return np.vstack([Pcg32(substream(seed, r)).signs(n) for r in range(replicates)]).astype(float)


def mc_esup(cls, M: float, replicates: int, seed, direction: str = "abs",
            restarts: int = RANDOM_STARTS, iterations: int = FW_ITERATIONS) -> SupremumEstimate:
    """Monte Carlo estimate of E sup over the l1-ball of radius M."""
    if replicates < 2:
        raise ValueError("need at least two replicates")
    seed = as_seed(seed)
    if isinstance(cls, LinearClass):
        E = replicate_signs(cls.n, replicates, seed)
        vals = _linear_draw_values(cls.design.entries, E, M, direction)
        return _summarize(vals, "monte_carlo")
    vals = np.empty(replicates)
    starts = 1 + 2 * min(TOP_COORDS, cls.dim) + restarts
    step = max(1, CHUNK_COLUMNS // starts)
    for a in range(0, replicates, step):
        reps = range(a, min(replicates, a + step))
        E = np.empty((cls.n, len(reps)))
        rand = np.empty((restarts, len(reps), 2))
        for c, r in enumerate(reps):
            g = Pcg32(substream(seed, r))
            E[:, c] = g.signs(cls.n)
            rand[:, c, :] = _random_vertices(g, cls.dim, restarts)
        plus, minus = _fw_patterns(cls, E, M, list(rand), iterations=iterations)
        vals[a:a + len(reps)] = _pick(plus, minus, direction)
    return _summarize(vals, "frank_wolfe_lower", lower_bound=True)


def mc_esup_finite(values: np.ndarray, replicates: int, seed, direction: str = "abs") -> SupremumEstimate:
    """E sup over a finite index set whose evaluation vectors are the columns of ``values`` (n x m)."""
    if replicates < 2:
        raise ValueError("need at least two replicates")
    values = np.atleast_2d(np.asarray(values, dtype=float))
    E = replicate_signs(values.shape[0], replicates, seed)
    S = E @ values
    vals = np.abs(S).max(axis=1) if direction == "abs" else S.max(axis=1)
    return _summarize(vals, "monte_carlo")


def _summarize(vals: np.ndarray, method: str, lower_bound: bool = False) -> SupremumEstimate:
    if np.all(vals == vals[0]):
        # deterministic per-draw value: report it without summation round-off
        return SupremumEstimate(float(vals[0]), 0.0, int(vals.size), method, lower_bound)
    m = float(np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size))
    return SupremumEstimate(m, se, int(vals.size), method, lower_bound)
