"""Constant-free bound shapes for E sup |X_theta| and the implied constants.

Universal constants are never assigned a value here: every shape omits
them, and experiments report ``empirical / shape`` as data.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

from .chaining import dudley_integral, ellipsoid_gamma2_bound, holder_gamma1_from_gamma2
from .errors import InvalidRange, ZeroShape

SHAPE_NAMES = ("thm11", "thm12", "thm13", "lemma22", "gamma1_mm", "ellipsoid_gamma2")


@dataclass
class BoundShape:
    name: str
    value: float
    inputs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.name not in SHAPE_NAMES:
            raise ValueError(f"unknown shape {self.name!r}")
        if not (math.isfinite(self.value) and self.value >= 0):
            raise ValueError(f"shape value must be finite and >= 0, got {self.value}")


def _check(n, l=1, M=1.0, A=1.0, anchor=0.0):
    if n < 1 or l < 1:
        raise ValueError("n and l must be >= 1")
    if M <= 0 or A <= 0:
        raise ValueError("M and A must be positive")
    if anchor < 0:
        raise ValueError("anchor must be non-negative")


def shape_thm11(n: int, l: int, M: float, A: float, anchor: float = 0.0) -> float:
    """anchor + sqrt(n log(l+1)) log(n+1) A M."""
    _check(n, l, M, A, anchor)
    return anchor + math.sqrt(n * math.log(l + 1)) * math.log(n + 1) * A * M


def shape_thm12(n: int, l: int, M: float, A: float = 1.0) -> float:
    """sqrt(n log(l+1)) A M (linear classes)."""
    _check(n, l, M, A)
    return math.sqrt(n * math.log(l + 1)) * A * M


def shape_thm13(n: int, M: float, anchor: float = 0.0, l: int | None = None) -> float:
    """anchor + sqrt(n log(n+1)) M; ``l`` is accepted and ignored."""
    _check(n, 1, M, 1.0, anchor)
    return anchor + math.sqrt(n * math.log(n + 1)) * M


def shape_lemma22(packing_log: Callable[[float], float], delta: float, U: float = 4.0,
                  breakpoints=None) -> float:
    """Entropy integral of sqrt(log(1 + D)) over [delta/U, delta/2]."""
    if U < 4:
        raise InvalidRange("U must be at least 4")
    if delta <= 0:
        raise InvalidRange("delta must be positive")
    return dudley_integral(packing_log, delta / U, delta / 2, breakpoints=breakpoints)


def shape_gamma1_mm(semiaxes, M: float, n: int) -> float:
    return holder_gamma1_from_gamma2(ellipsoid_gamma2_bound(semiaxes), M, n)


def implied_constant(empirical: float, shape: float) -> float:
    if shape <= 0:
        raise ZeroShape("shape must be positive to fit a constant")
    return empirical / shape


def prop31_gap(esup_abs: float, anchor_abs: float, esup_signed: float,
               se_abs: float = 0.0, se_anchor: float = 0.0, se_signed: float = 0.0) -> bool:
    """E sup|X| - E|X_t0| <= 2 E sup X, allowing three combined standard errors."""
    slack = 3.0 * math.sqrt(se_abs ** 2 + se_anchor ** 2 + 4.0 * se_signed ** 2)
    return esup_abs - anchor_abs <= 2.0 * esup_signed + slack


def write_shapes_csv(shapes, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["name", "n", "l", "M", "A", "anchor", "value"])
    for s in shapes:
        i = s.inputs
        w.writerow([s.name, i.get("n", ""), i.get("l", ""), i.get("M", ""), i.get("A", ""),
                    i.get("anchor", ""), repr(float(s.value))])
