"""Nested nets and chains, entropy integrals, and gamma_beta functionals on finite spaces."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidRange, NotSorted, TooLarge
from .geometry import Metric, _greedy_indices, distance_matrix

SIMPSON_PANELS = 1024
GRID_RESOLUTION = 20
MAX_GRID_POINTS = 8


@dataclass
class NetHierarchy:
    """Levels T_0 <= ... <= T_{k+1} (point indices) with separation eta * 2**-j at level j.

    ``parent[j]`` maps each index of level j+1 to its link in level j.
    """
    levels: list[list[int]]
    eta: float
    parent: list[dict[int, int]] = field(default_factory=list)

    @property
    def k(self) -> int:
        return len(self.levels) - 2

    def separation(self, j: int) -> float:
        return self.eta * 2.0 ** (-j)

    def chain(self, index: int) -> list[int]:
        """c(t): the chain from a point of the finest level down to T_0."""
        out = [index]
        for j in range(len(self.levels) - 2, -1, -1):
            out.append(self.parent[j][out[-1]])
        return out

    def to_text(self) -> str:
        lines = [f"eta: {self.eta!r}"]
        for j, lev in enumerate(self.levels):
            lines.append(f"level {j}: " + " ".join(map(str, lev)))
        for j, par in enumerate(self.parent):
            edges = " ".join(f"{c}->{p}" for c, p in sorted(par.items()))
            lines.append(f"parents {j + 1}->{j}: {edges}")
        return "\n".join(lines) + "\n"


def build_nested_nets(points: Sequence, metric: Metric | None = None, eta: float = 1.0, k: int = 0,
                      distances: np.ndarray | None = None) -> NetHierarchy:
    """Greedy maximal separated sets, each level seeded with the previous one."""
    if eta <= 0:
        raise ValueError("eta must be positive")
    if k < 0:
        raise ValueError("k must be non-negative")
    D = distance_matrix(points, metric) if distances is None else distances
    levels: list[list[int]] = []
    prev: list[int] = []
    for j in range(k + 2):
        prev = _greedy_indices(D, eta * 2.0 ** (-j), seed_indices=prev)
        levels.append(list(prev))
    parents = []
    for j in range(k + 1):
        coarse = np.array(levels[j])
        par = {}
        for t in levels[j + 1]:
            # nearest coarse point; ties to the earliest kept point
            par[t] = int(coarse[np.argmin(D[t, coarse])])
        parents.append(par)
    return NetHierarchy(levels, float(eta), parents)


def check_hierarchy(h: NetHierarchy, D: np.ndarray) -> list[str]:
    """Violated invariants (empty when nesting, separation and link length all hold)."""
    problems = []
    for j, lev in enumerate(h.levels):
        if j > 0 and not set(h.levels[j - 1]) <= set(lev):
            problems.append(f"level {j - 1} not contained in level {j}")
        sep = h.separation(j)
        idx = np.asarray(lev, dtype=int)
        sub = D[np.ix_(idx, idx)]
        close = np.argwhere(np.triu(~(sub > sep), 1))
        for a, b in idx[close]:
            problems.append(f"level {j}: points {a},{b} at distance {D[a, b]:.6g} <= {sep:.6g}")
    for j, par in enumerate(h.parent):
        if set(par) != set(h.levels[j + 1]):
            problems.append(f"parent map {j + 1}->{j} does not cover level {j + 1}")
        for c, p in par.items():
            if p not in h.levels[j]:
                problems.append(f"parent {p} of {c} is not in level {j}")
            if D[c, p] > h.separation(j):
                problems.append(f"link {c}->{p} has length {D[c, p]:.6g} > {h.separation(j):.6g}")
    return problems


def chain_bound(h: NetHierarchy, metric=None) -> float:
    """2 * sum_j eta 2**-j * sqrt(log(1 + |T_{j+1}|)) over levels with a nontrivial link.

    A level whose links are all trivial (T_{j+1} == T_j) carries zero
    increments and contributes nothing.
    """
    total = 0.0
    for j in range(len(h.levels) - 1):
        if len(h.levels[j + 1]) == len(h.levels[j]):
            continue
        total += h.separation(j) * math.sqrt(math.log1p(len(h.levels[j + 1])))
    return 2.0 * total


def _simpson(f, a: float, b: float, panels: int) -> float:
    if panels % 2:
        panels += 1
    if a > 0:
        x = np.geomspace(a, b, panels + 1)
    else:
        x = np.linspace(a, b, panels + 1)
    y = np.array([f(t) for t in x], dtype=float)
    total = 0.0
    for i in range(0, panels, 2):
        h0 = x[i + 1] - x[i]
        h1 = x[i + 2] - x[i + 1]
        # non-uniform Simpson on the pair of panels
        hs = h0 + h1
        total += hs / 6.0 * ((2 - h1 / h0) * y[i] + hs * hs / (h0 * h1) * y[i + 1] + (2 - h0 / h1) * y[i + 2])
    return total


def dudley_integral(packing_log: Callable[[float], float], lower: float, upper: float,
                    breakpoints: Sequence[float] | None = None, panels: int = SIMPSON_PANELS,
                    floor: float | None = None) -> float:
    """Integral of sqrt(packing_log(eps)) over [lower, upper].

    ``packing_log(eps)`` is log(1 + D(eps)).  The default rule is composite
    Simpson on ``panels`` log-spaced panels; with ``lower == 0`` the
    integrand is held at its value on [0, floor] (default ``upper * 1e-9``).
    When the packing curve is a step function, pass its jump locations as
    ``breakpoints`` and the integral is summed exactly piece by piece.
    """
    if not 0 <= lower < upper:
        raise InvalidRange(f"need 0 <= lower < upper, got [{lower}, {upper}]")

    def f(eps):
        return math.sqrt(max(packing_log(eps), 0.0))

    if breakpoints is not None:
        edges = [lower, *sorted({b for b in breakpoints if lower < b < upper}), upper]
        return math.fsum((b - a) * f(0.5 * (a + b)) for a, b in zip(edges[:-1], edges[1:]))
    start, total = lower, 0.0
    if lower == 0:
        start = upper * 1e-9 if floor is None else floor
        total = start * f(start)
    return total + _simpson(f, start, upper, panels)


def packing_log_function(D: np.ndarray) -> tuple[Callable[[float], float], list[float]]:
    """log(1 + greedy packing count) as a function of eps, with its jump points."""
    dists = np.unique(D[np.triu_indices(D.shape[0], 1)])
    dists = dists[dists > 0]

    def f(eps):
        return math.log1p(len(_greedy_indices(D, eps)))

    return f, dists.tolist()


@dataclass(frozen=True)
class DiscreteMeasure:
    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or np.any(w < 0) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be non-negative and sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def uniform(cls, m: int) -> "DiscreteMeasure":
        return cls(np.full(m, 1.0 / m))

    @classmethod
    def normalized(cls, w) -> "DiscreteMeasure":
        w = np.asarray(w, dtype=float)
        return cls(w / w.sum())


def _radial_tables(D: np.ndarray):
    # per point: neighbour order by distance, and the distinct radii
    order = np.argsort(D, axis=1, kind="stable")
    radii = np.take_along_axis(D, order, axis=1)
    return order, radii


def majorizing_integrals(D: np.ndarray, W: np.ndarray, beta: float) -> np.ndarray:
    """Radial integrals for many measures at once.

    ``W`` has shape (measures, points).  Returns an array (measures, points)
    of int_0^inf eps^(beta-1) log(1/mu(B(t, eps)))^(beta/2) d eps with
    closed balls; the integrand is a step function so the sum is exact.
    """
    W = np.atleast_2d(W)
    order, radii = _radial_tables(D)
    m = D.shape[0]
    out = np.zeros((W.shape[0], m))
    with np.errstate(divide="ignore", invalid="ignore"):
        for t in range(m):
            r = radii[t]
            mass = np.cumsum(W[:, order[t]], axis=1)
            # mass within radius r[i] includes ties at equal distance
            last = np.searchsorted(r, r, side="right") - 1
            mass = mass[:, last]
            mass = np.minimum(mass, 1.0)
            logs = np.where(mass > 0, -np.log(mass), np.inf)
            logs = np.maximum(logs, 0.0) ** (beta / 2.0)
            widths = np.diff(r ** beta) / beta
            terms = np.where(widths > 0, logs[:, :-1] * widths, 0.0)
            terms = np.where((widths > 0) & np.isinf(logs[:, :-1]), np.inf, terms)
            out[:, t] = terms.sum(axis=1)
    return out


def gamma_value(D: np.ndarray, weights, beta: float) -> float:
    """sup_t (radial integral)^(1/beta) for one measure; +inf when a zero-mass ball meets a positive integrand."""
    vals = majorizing_integrals(D, np.asarray(weights, dtype=float)[None, :], beta)[0]
    return float(np.max(vals) ** (1.0 / beta))


def gamma_beta_estimate(points: Sequence, metric: Metric | None, beta: float,
                        candidates: Sequence[DiscreteMeasure], distances: np.ndarray | None = None) -> float:
    """Minimum over candidate measures of the majorizing functional: an upper bound on gamma_beta."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    if not candidates:
        raise ValueError("need at least one candidate measure")
    D = distance_matrix(points, metric) if distances is None else distances
    W = np.vstack([c.weights for c in candidates])
    vals = majorizing_integrals(D, W, beta).max(axis=1)
    return float(vals.min() ** (1.0 / beta))


def net_weighted_measure(h: NetHierarchy, m: int) -> DiscreteMeasure:
    """Mass proportional to 2**-j where j is the first level containing the point."""
    first = np.full(m, len(h.levels), dtype=float)
    for j in range(len(h.levels) - 1, -1, -1):
        first[h.levels[j]] = j
    return DiscreteMeasure.normalized(2.0 ** (-first))


def refine_measure(D: np.ndarray, start: DiscreteMeasure, beta: float, sweeps: int = 20,
                   step: float = 0.01) -> DiscreteMeasure:
    """Local search: move mass ``step`` between pairs of points while the functional decreases."""
    w = start.weights.copy()
    best = majorizing_integrals(D, w[None, :], beta).max()
    m = w.size
    for _ in range(sweeps):
        improved = False
        for i in range(m):
            for j in range(m):
                if i == j or w[i] < step:
                    continue
                cand = w.copy()
                cand[i] -= step
                cand[j] += step
                val = majorizing_integrals(D, cand[None, :], beta).max()
                if val < best:
                    w, best, improved = cand, val, True
        if not improved:
            break
    return DiscreteMeasure.normalized(np.maximum(w, 0.0))


def default_candidates(D: np.ndarray, beta: float, refine: bool = True) -> list[DiscreteMeasure]:
    m = D.shape[0]
    pos = D[D > 0]
    eta = float(D.max()) if D.size else 1.0
    depth = 0 if pos.size == 0 else max(0, int(math.ceil(math.log2(eta / pos.min()))) + 1)
    h = build_nested_nets(range(m), None, eta if eta > 0 else 1.0, depth, distances=D)
    cands = [DiscreteMeasure.uniform(m), net_weighted_measure(h, m)]
    if refine:
        vals = [majorizing_integrals(D, c.weights[None, :], beta).max() for c in cands]
        cands.append(refine_measure(D, cands[int(np.argmin(vals))], beta))
    return cands


def simplex_grid(m: int, resolution: int = GRID_RESOLUTION) -> np.ndarray:
    """All weight vectors with entries in (1/resolution) * Z summing to 1 (strictly positive only)."""
    # zero weights make gamma infinite, so only compositions with positive parts matter
    if m > resolution:
        raise TooLarge("resolution too coarse for this many points")
    rows = []
    for cuts in itertools.combinations(range(1, resolution), m - 1):
        parts = np.diff((0, *cuts, resolution))
        rows.append(parts)
    return np.array(rows, dtype=float) / resolution


def gamma_beta_grid(D: np.ndarray, beta: float, resolution: int = GRID_RESOLUTION) -> float:
    m = D.shape[0]
    if m > MAX_GRID_POINTS:
        raise TooLarge(f"grid search is limited to {MAX_GRID_POINTS} points, got {m}")
    if m == 1:
        return 0.0
    best = np.inf
    grid = simplex_grid(m, resolution)
    for chunk in np.array_split(grid, max(1, grid.shape[0] // 20000)):
        vals = majorizing_integrals(D, chunk, beta).max(axis=1)
        best = min(best, float(vals.min()))
    return best ** (1.0 / beta)


def subset_gamma_check(points: Sequence, subset_indices: Sequence[int], metric: Metric | None,
                       beta: float, distances: np.ndarray | None = None,
                       resolution: int = GRID_RESOLUTION) -> tuple[float, float]:
    """(gamma_beta(S), gamma_beta(T)) by simplex grid search; expect first <= 2 * second."""
    if len(points) > MAX_GRID_POINTS:
        raise TooLarge(f"grid search is limited to {MAX_GRID_POINTS} points, got {len(points)}")
    idx = list(subset_indices)
    if not idx:
        raise ValueError("subset must be non-empty")
    D = distance_matrix(points, metric) if distances is None else distances
    return gamma_beta_grid(D[np.ix_(idx, idx)], beta, resolution), gamma_beta_grid(D, beta, resolution)


def ellipsoid_gamma2_bound(semiaxes) -> float:
    """sup_i a_i sqrt(i) for non-increasing positive semiaxes."""
    a = np.asarray(semiaxes, dtype=float)
    if a.ndim != 1 or a.size == 0 or np.any(a <= 0):
        raise ValueError("semiaxes must be positive")
    if np.any(np.diff(a) > 0):
        raise NotSorted("semiaxes must be non-increasing")
    return float(np.max(a * np.sqrt(np.arange(1, a.size + 1))))


def holder_gamma1_from_gamma2(gamma2_shape: float, M: float, n: int) -> float:
    """sqrt(2) * gamma2 * (1 + sqrt(log(4n))): the gamma_1 composite on the window [M, 4nM]."""
    if gamma2_shape < 0 or M <= 0 or n < 1:
        raise ValueError("need gamma2_shape >= 0, M > 0, n >= 1")
    return math.sqrt(2.0) * gamma2_shape * (1.0 + math.sqrt(math.log(4 * n)))
