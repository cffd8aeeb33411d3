"""Design matrices: construction, random families, and the ellipsoid envelope.

A design is an ``n x l`` matrix whose columns ``y_j`` are the covariable
vectors, normalized to ``||y_j||_2 = sqrt(n)``.  The correlated family is
described by an envelope condition: after an orthogonal rotation ``R``
every column satisfies ``sum_j j * (R y)_j**2 / n <= C``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from scipy.linalg import hadamard

from .errors import NotNormalized, NotOrthogonal, NotSorted, ZeroColumn
from .rng import Pcg32, RngSeed, as_seed, substream

NORM_TOL = 1e-6
ORTHO_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DesignMatrix:
    entries: np.ndarray
    # columns where requested normalization was skipped (ellipsoid designs)
    flagged: np.ndarray = field(default=None)

    def __post_init__(self):
        X = np.array(self.entries, dtype=float, copy=True)
        if X.ndim != 2 or X.shape[0] < 1 or X.shape[1] < 1:
            raise ValueError(f"design must be a non-empty 2-d matrix, got shape {X.shape}")
        if not np.all(np.isfinite(X)):
            raise ValueError("design entries must be finite")
        X.setflags(write=False)
        object.__setattr__(self, "entries", X)
        flags = np.zeros(X.shape[1], dtype=bool) if self.flagged is None else np.asarray(self.flagged, dtype=bool)
        flags.setflags(write=False)
        object.__setattr__(self, "flagged", flags)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def l(self) -> int:
        return self.entries.shape[1]

    def column_norms(self) -> np.ndarray:
        return np.linalg.norm(self.entries, axis=0)

    def is_normalized(self, tol: float = NORM_TOL) -> bool:
        return bool(np.all(np.abs(self.column_norms() - np.sqrt(self.n)) <= tol))


def make_design(entries, normalize: bool = True) -> DesignMatrix:
    """Build a design, rescaling columns to norm sqrt(n) or verifying that they are."""
    X = np.asarray(entries, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if not np.all(np.isfinite(X)):
        raise ValueError("design entries must be finite")
    n = X.shape[0]
    norms = np.linalg.norm(X, axis=0)
    if normalize:
        zero = np.flatnonzero(norms == 0)
        if zero.size:
            raise ZeroColumn(f"cannot normalize zero column(s) {zero.tolist()}")
        X = X * (np.sqrt(n) / norms)
    else:
        bad = np.flatnonzero(np.abs(norms - np.sqrt(n)) > NORM_TOL)
        if bad.size:
            raise NotNormalized(f"columns {bad.tolist()[:10]} deviate from norm sqrt(n)={np.sqrt(n):.6g}")
    return DesignMatrix(X)


def identity_design(n: int) -> DesignMatrix:
    return DesignMatrix(np.sqrt(n) * np.eye(n))


def gen_sign_design(n: int, l: int, seed) -> DesignMatrix:
    """i.i.d. uniform +-1 entries, filled column by column from one stream."""
    g = Pcg32(as_seed(seed))
    signs = g.signs(n * l).astype(float)
    return DesignMatrix(signs.reshape(l, n).T)


def gen_gaussian_design(n: int, l: int, seed) -> DesignMatrix:
    g = Pcg32(as_seed(seed))
    Z = g.normal(n * l).reshape(l, n).T
    return make_design(Z, normalize=True)


def random_rotation(n: int, seed) -> np.ndarray:
    """Haar-distributed orthogonal matrix from QR of a Gaussian matrix."""
    g = Pcg32(as_seed(seed))
    Z = g.normal(n * n).reshape(n, n)
    Q, Rr = np.linalg.qr(Z)
    d = np.sign(np.diag(Rr))
    d[d == 0] = 1.0
    return Q * d


def check_orthogonal(R, tol: float = ORTHO_TOL) -> np.ndarray:
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1]:
        raise NotOrthogonal(f"rotation must be square, got shape {R.shape}")
    err = np.max(np.abs(R.T @ R - np.eye(R.shape[0])))
    if err > tol:
        raise NotOrthogonal(f"R^T R deviates from identity by {err:.3g}")
    return R


@dataclass(frozen=True, eq=False)
class EllipsoidSpec:
    semiaxes: np.ndarray
    rotation: np.ndarray
    level: float = 1.0

    def __post_init__(self):
        a = np.asarray(self.semiaxes, dtype=float)
        if a.ndim != 1 or a.size == 0 or np.any(a <= 0):
            raise ValueError("semiaxes must be a non-empty vector of positive reals")
        if np.any(np.diff(a) > 0):
            raise NotSorted("semiaxes must be non-increasing")
        R = check_orthogonal(self.rotation, 1e-9)
        if R.shape[0] != a.size:
            raise ValueError("rotation size must match the number of semiaxes")
        if self.level <= 0:
            raise ValueError("level must be positive")
        object.__setattr__(self, "semiaxes", a)
        object.__setattr__(self, "rotation", R)

    @property
    def n(self) -> int:
        return self.semiaxes.size

    def inside_envelope(self) -> bool:
        # the sampling ellipsoid must sit inside {v : sum_j j v_j^2 / n <= level}
        j = np.arange(1, self.n + 1)
        return bool(np.all(self.semiaxes ** 2 <= self.level * self.n / j * (1 + 1e-12)))


def envelope_spec(n: int, level: float = 1.0, rotation=None, decay: float = 0.5, seed=None) -> EllipsoidSpec:
    """Ellipsoid with semiaxes ``sqrt(level*n) * j**(-decay)``.

    ``decay = 0.5`` gives the envelope ellipsoid itself; larger values shrink
    the trailing axes and concentrate the columns.
    """
    if decay < 0.5:
        raise ValueError("decay below 1/2 leaves the envelope")
    j = np.arange(1, n + 1, dtype=float)
    a = np.sqrt(level * n) * j ** (-decay)
    if rotation is None:
        rotation = np.eye(n) if seed is None else random_rotation(n, seed)
    return EllipsoidSpec(a, rotation, level)


def _envelope_values(V: np.ndarray) -> np.ndarray:
    n = V.shape[0]
    j = np.arange(1, n + 1, dtype=float)[:, None]
    return (j * V ** 2).sum(axis=0) / n


def _sign_patterns(rank: int) -> np.ndarray:
    m = 1
    while m < rank:
        m *= 2
    return hadamard(m)[:, :rank].astype(float)


def gen_ellipsoid_design(n: int, l: int, spec: EllipsoidSpec, seed, *, rank: int | None = None,
                         balanced: bool = False, normalize: str = "none") -> DesignMatrix:
    """Columns ``R^T v`` with ``v`` on the sampling ellipsoid of ``spec``.

    A base point is ``v = r * a * u`` with ``u`` uniform on the unit sphere of
    the leading ``rank`` coordinates and ``r`` uniform in [0.9, 1].  With
    ``balanced`` each base point is emitted under the rows of a Sylvester
    Hadamard sign array, so cross moments between rotated coordinates cancel
    and the principal axes of the sample coincide with the rows of ``R``.

    ``normalize``: ``"none"``; ``"best_effort"`` rescales a column to norm
    sqrt(n) only if it stays inside the envelope at ``spec.level`` (else the
    column is flagged); ``"exact"`` rescales every column and shrinks the part
    orthogonal to the first rotated axis as far as the envelope requires.
    """
    if spec.n != n:
        raise ValueError(f"spec has {spec.n} semiaxes, expected n={n}")
    if not spec.inside_envelope():
        raise ValueError("sampling ellipsoid is not contained in the envelope at spec.level")
    if normalize not in ("none", "best_effort", "exact"):
        raise ValueError(f"unknown normalize mode {normalize!r}")
    d = n if rank is None else int(rank)
    if not 1 <= d <= n:
        raise ValueError("rank must lie in [1, n]")
    seed = as_seed(seed)
    patterns = _sign_patterns(d) if balanced else np.ones((1, d))
    m = patterns.shape[0]
    nbase = -(-l // m)
    g = Pcg32(substream(seed, 1))
    G = g.normal(d * nbase).reshape(nbase, d).T
    norms = np.linalg.norm(G, axis=0)
    norms[norms == 0] = 1.0
    U = G / norms
    r = 0.9 + 0.1 * Pcg32(substream(seed, 2)).uniform(nbase)
    base = spec.semiaxes[:d, None] * U * r
    V = np.zeros((n, nbase * m))
    for c in range(m):
        V[:d, c::m] = base * patterns[c][:, None]
    V = V[:, :l]

    flagged = np.zeros(l, dtype=bool)
    if normalize == "best_effort":
        vn = np.linalg.norm(V, axis=0)
        scale = np.where(vn > 0, np.sqrt(n) / np.where(vn > 0, vn, 1.0), 1.0)
        ok = (vn > 0) & (_envelope_values(V * scale) <= spec.level * (1 + 1e-12))
        V = np.where(ok, V * scale, V)
        flagged = ~ok
    elif normalize == "exact":
        V = _normalize_into_envelope(V, spec.level)
    return DesignMatrix(spec.rotation.T @ V, flagged)


def _normalize_into_envelope(V: np.ndarray, level: float) -> np.ndarray:
    n, l = V.shape
    out = np.zeros_like(V)
    j = np.arange(1, n + 1, dtype=float)
    for i in range(l):
        v = V[:, i]
        head = v[0]
        tail = v[1:]
        tn = np.linalg.norm(tail)
        sgn = 1.0 if head >= 0 else -1.0
        if tn == 0:
            out[0, i] = sgn * np.sqrt(n)
            continue
        u = tail / tn
        s_u = float(np.sum(j[1:] * u ** 2))  # >= 2
        phi0 = np.arctan2(tn, abs(head))
        # unit vector cos(phi) e_1 + sin(phi) u has envelope value cos^2 + sin^2 * s_u
        sin2_max = (level - 1.0) / (s_u - 1.0) if level > 1 else 0.0
        phi = min(phi0, np.arcsin(np.sqrt(min(max(sin2_max, 0.0), 1.0))))
        out[0, i] = sgn * np.sqrt(n) * np.cos(phi)
        out[1:, i] = np.sqrt(n) * np.sin(phi) * u
    return out


def ellipsoid_score(design: DesignMatrix, R) -> float:
    """max over columns of sum_j j (R y)_j^2 / n; the envelope holds at C iff score <= C."""
    R = check_orthogonal(R)
    if R.shape[0] != design.n:
        raise ValueError(f"rotation is {R.shape[0]}x{R.shape[0]}, design has n={design.n}")
    return float(_envelope_values(R @ design.entries).max())


def fit_rotation(design: DesignMatrix) -> np.ndarray:
    """Rows are eigenvectors of the column second-moment matrix, largest eigenvalue first."""
    Y = design.entries
    S = Y @ Y.T / design.l
    w, Q = np.linalg.eigh(S)
    order = np.argsort(-w, kind="stable")
    R = Q[:, order].T.copy()
    # deterministic orientation: largest-magnitude entry of each row positive
    idx = np.argmax(np.abs(R), axis=1)
    R *= np.sign(R[np.arange(R.shape[0]), idx])[:, None]
    return R


def write_design(design: DesignMatrix, fh: TextIO) -> None:
    fh.write(f"{design.n} {design.l}\n")
    for row in design.entries:
        fh.write(" ".join(f"{x:.17g}" for x in row) + "\n")


def read_design(fh: TextIO, normalize: bool = False, verify: bool = False) -> DesignMatrix:
    header = fh.readline().split()
    if len(header) != 2:
        raise ValueError("first line must be 'n l'")
    n, l = int(header[0]), int(header[1])
    rows = [list(map(float, fh.readline().split())) for _ in range(n)]
    X = np.array(rows, dtype=float)
    if X.shape != (n, l):
        raise ValueError(f"expected a {n}x{l} matrix, read shape {X.shape}")
    if normalize or verify:
        return make_design(X, normalize=normalize)
    return DesignMatrix(X)
