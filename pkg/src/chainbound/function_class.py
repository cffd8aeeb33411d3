"""Function classes indexed by the l1-ball and their pseudometric.

``LinearClass`` evaluates ``X @ theta``.  ``CompositeClass`` evaluates
``g(X' theta', X'' theta'')`` coordinate-wise for a contraction ``g`` on R^2.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .design import DesignMatrix
from .errors import DimensionMismatch
from .rng import Pcg32, RngSeed, as_seed

FD_STEP = 1e-6


@dataclass(frozen=True)
class L1Ball:
    radius: float
    dimension: int

    def __contains__(self, theta) -> bool:
        theta = np.asarray(theta, dtype=float)
        return theta.shape == (self.dimension,) and float(np.abs(theta).sum()) <= self.radius + 1e-12


@dataclass(frozen=True)
class Contraction:
    """A 1-Lipschitz map R^2 -> R, vectorized over numpy arrays.

    ``grad`` returns the pair of partial derivatives; when it is missing a
    central finite difference with step ``FD_STEP`` is used.
    """
    name: str
    func: Callable[[np.ndarray, np.ndarray], np.ndarray]
    grad: Callable | None = None

    def __call__(self, u, v):
        return self.func(u, v)

    def gradient(self, u, v):
        if self.grad is not None:
            return self.grad(u, v)
        h = FD_STEP
        gu = (self.func(u + h, v) - self.func(u - h, v)) / (2 * h)
        gv = (self.func(u, v + h) - self.func(u, v - h)) / (2 * h)
        return gu, gv


def _dist_grad(u, v):
    r = np.hypot(u, v)
    safe = np.where(r > 0, r, 1.0)
    return np.where(r > 0, u / safe, 0.0), np.where(r > 0, v / safe, 0.0)


def _sech2(x):
    return 1.0 - np.tanh(x) ** 2


_REGISTRY: dict[str, Contraction] = {}


def register_contraction(name: str, func, grad=None, validate: bool = True) -> Contraction:
    c = Contraction(name, func, grad)
    if validate:
        ratio = lipschitz_probe(c)
        if ratio > 1 + 1e-6:
            raise ValueError(f"contraction {name!r} has empirical Lipschitz ratio {ratio:.6g} > 1")
    _REGISTRY[name] = c
    return c


def get_contraction(name: str) -> Contraction:
    try:
        return _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown contraction {name!r}; known: {sorted(_REGISTRY)}") from None


def builtin_contractions() -> list[Contraction]:
    return [_REGISTRY[k] for k in ("half_sum", "first_coord", "dist_to_origin", "soft_clip")]


def lipschitz_probe(c: Contraction, pairs: int = 10_000, seed=RngSeed(0x5EED, 7)) -> float:
    """Largest |g(p) - g(q)| / |p - q| over random pairs at mixed scales."""
    g = Pcg32(as_seed(seed))
    scale = 10.0 ** (4 * g.uniform(pairs) - 2)
    P = g.normal(2 * pairs).reshape(pairs, 2) * scale[:, None]
    Q = P + g.normal(2 * pairs).reshape(pairs, 2) * (scale[:, None] * 10.0 ** (3 * g.uniform(pairs) - 3)[:, None])
    num = np.abs(c(P[:, 0], P[:, 1]) - c(Q[:, 0], Q[:, 1]))
    den = np.hypot(P[:, 0] - Q[:, 0], P[:, 1] - Q[:, 1])
    mask = den > 0
    return float(np.max(num[mask] / den[mask]))


register_contraction("half_sum", lambda u, v: 0.5 * (u + v),
                     lambda u, v: (np.full_like(np.asarray(u, float), 0.5), np.full_like(np.asarray(v, float), 0.5)))
register_contraction("first_coord", lambda u, v: np.asarray(u, float) + 0.0 * v,
                     lambda u, v: (np.ones_like(np.asarray(u, float)), np.zeros_like(np.asarray(v, float))))
register_contraction("dist_to_origin", lambda u, v: np.hypot(u, v), _dist_grad)
register_contraction("soft_clip", lambda u, v: 0.5 * np.tanh(u) + 0.5 * np.tanh(v),
                     lambda u, v: (0.5 * _sech2(u), 0.5 * _sech2(v)))


@dataclass(frozen=True, eq=False)
class LinearClass:
    design: DesignMatrix

    @property
    def n(self) -> int:
        return self.design.n

    @property
    def dim(self) -> int:
        return self.design.l

    def evaluate(self, theta) -> np.ndarray:
        theta = _check_dim(theta, self.dim)
        return self.design.entries @ theta

    def pseudometric(self, theta, theta2) -> float:
        return float(np.linalg.norm(self.evaluate(theta) - self.evaluate(theta2)))


@dataclass(frozen=True, eq=False)
class CompositeClass:
    first: DesignMatrix
    second: DesignMatrix
    g: Contraction

    def __post_init__(self):
        if self.first.n != self.second.n:
            raise DimensionMismatch("both designs need the same number of rows")
        if isinstance(self.g, str):
            object.__setattr__(self, "g", get_contraction(self.g))

    @property
    def n(self) -> int:
        return self.first.n

    @property
    def split(self) -> tuple[int, int]:
        return self.first.l, self.second.l

    @property
    def dim(self) -> int:
        return self.first.l + self.second.l

    def images(self, theta) -> tuple[np.ndarray, np.ndarray]:
        theta = _check_dim(theta, self.dim)
        l1 = self.first.l
        return self.first.entries @ theta[:l1], self.second.entries @ theta[l1:]

    def evaluate(self, theta) -> np.ndarray:
        u, v = self.images(theta)
        return np.asarray(self.g(u, v), dtype=float)

    def pseudometric(self, theta, theta2) -> float:
        return float(np.linalg.norm(self.evaluate(theta) - self.evaluate(theta2)))

    def preimage_distance(self, theta, theta2) -> float:
        """Euclidean distance of the linear images; dominates the pseudometric."""
        u1, v1 = self.images(theta)
        u2, v2 = self.images(theta2)
        return float(np.sqrt(np.sum((u1 - u2) ** 2) + np.sum((v1 - v2) ** 2)))


FunctionClass = LinearClass | CompositeClass


def _check_dim(theta, dim: int) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (dim,):
        raise DimensionMismatch(f"parameter has shape {theta.shape}, expected ({dim},)")
    return theta


def evaluate(cls: FunctionClass, theta) -> np.ndarray:
    return cls.evaluate(theta)


def pseudometric(cls: FunctionClass, theta, theta2) -> float:
    return cls.pseudometric(theta, theta2)


def rademacher(n: int, seed) -> np.ndarray:
    return Pcg32(as_seed(seed)).signs(n)


def check_rademacher(eps) -> np.ndarray:
    eps = np.asarray(eps)
    if eps.ndim != 1 or not np.all(np.isin(eps, (-1, 1))):
        raise ValueError("Rademacher vector entries must be -1 or +1")
    return eps.astype(float)


def lipschitz_A_spectral(design: DesignMatrix) -> float:
    """sigma_max(X) / sqrt(n): the smallest A with d(t, t') <= sqrt(n) A ||t - t'||_2."""
    return float(np.linalg.norm(design.entries, 2) / np.sqrt(design.n))


def radius_A(design: DesignMatrix, M: float = 1.0) -> float:
    """max_j ||y_j||_2 / sqrt(n): sup of ||X theta||_2 over the l1-ball sits at a vertex."""
    return float(design.column_norms().max() / np.sqrt(design.n))
