"""Flat ``key = value`` experiment configs.

One setting per line; ``#`` starts a comment; lists are comma-separated.
Unknown keys are rejected.  Recognised keys:

=================  =========================================================
experiment         scaling_thm12 | correlated_thm13 | maurey_check |
                   chaining_check | gamma_check
n_grid, l_grid     comma-separated positive integers
M                  positive real (default 1)
replicates         integer >= 2
seed               ``s`` or ``s:stream`` (unsigned 64-bit integers)
design             sign | gaussian | identity | ellipsoid(C[, decay])
contraction        registered contraction name (composite experiments)
output_path        CSV destination
control_design     optional second design family swept alongside (sign | gaussian)
rank               ellipsoid sampling rank (default n)
balanced           true | false: emit Hadamard-signed copies of base points
normalize          none | best_effort | exact (ellipsoid column scaling)
k_grid             Maurey sample sizes
pool_size          points per sampled pool
levels             depth k of the net hierarchy
trials             random spaces per cell
restarts           random Frank-Wolfe starts per draw
iterations         Frank-Wolfe iteration cap
=================  =========================================================
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace

from .errors import ConfigError
from .function_class import get_contraction
from .rng import RngSeed

EXPERIMENTS = ("scaling_thm12", "correlated_thm13", "maurey_check", "chaining_check", "gamma_check")
DESIGNS = ("sign", "gaussian", "identity", "ellipsoid")
NORMALIZE_MODES = ("none", "best_effort", "exact")


@dataclass(frozen=True)
class DesignFamily:
    kind: str
    C: float = 1.0
    decay: float = 0.5

    def label(self) -> str:
        if self.kind == "ellipsoid":
            return f"ellipsoid({self.C!r},{self.decay!r})"
        return self.kind

    @property
    def linear_only(self) -> bool:
        return self.kind != "ellipsoid"


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    n_grid: tuple[int, ...]
    l_grid: tuple[int, ...]
    replicates: int
    seed: RngSeed
    output_path: str
    M: float = 1.0
    design: DesignFamily = DesignFamily("sign")
    contraction: str | None = None
    control_design: DesignFamily | None = None
    rank: int | None = None
    balanced: bool = False
    normalize: str = "none"
    k_grid: tuple[int, ...] = ()
    pool_size: int = 40
    levels: int = 4
    trials: int = 20
    restarts: int = 5
    iterations: int = 100

    def with_overrides(self, seed: RngSeed | None = None, output_path: str | None = None) -> "ExperimentConfig":
        out = self
        if seed is not None:
            out = replace(out, seed=seed)
        if output_path is not None:
            out = replace(out, output_path=output_path)
        return out


def _ints(key, text) -> tuple[int, ...]:
    try:
        vals = tuple(int(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated integers, got {text!r}") from None
    if not vals:
        raise ConfigError(f"{key}: list must be non-empty")
    if any(v < 1 for v in vals):
        raise ConfigError(f"{key}: entries must be positive")
    return vals


def _int(key, text, minimum=1) -> int:
    try:
        v = int(text)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {text!r}") from None
    if v < minimum:
        raise ConfigError(f"{key}: must be >= {minimum}")
    return v


def _float(key, text) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {text!r}") from None
    if not v > 0 or v == float("inf"):
        raise ConfigError(f"{key}: must be a finite positive number")
    return v


def _bool(key, text) -> bool:
    t = text.lower()
    if t in ("true", "yes", "1"):
        return True
    if t in ("false", "no", "0"):
        return False
    raise ConfigError(f"{key}: expected true or false, got {text!r}")


def parse_seed(text: str) -> RngSeed:
    parts = text.split(":")
    try:
        vals = [int(p, 0) for p in parts]
    except ValueError:
        raise ConfigError(f"seed: expected 's' or 's:stream', got {text!r}") from None
    if len(vals) not in (1, 2):
        raise ConfigError(f"seed: expected 's' or 's:stream', got {text!r}")
    try:
        return RngSeed(*vals)
    except ValueError as exc:
        raise ConfigError(f"seed: {exc}") from None


_ELLIPSOID = re.compile(r"ellipsoid\s*\(\s*([^,()]+?)\s*(?:,\s*([^,()]+?)\s*)?\)$")


def parse_design(text: str, key: str = "design") -> DesignFamily:
    t = text.strip()
    if t in ("sign", "gaussian", "identity"):
        return DesignFamily(t)
    m = _ELLIPSOID.match(t)
    if not m:
        raise ConfigError(f"{key}: expected sign, gaussian, identity or ellipsoid(C[, decay]), got {text!r}")
    C = _float(key, m.group(1))
    decay = _float(key, m.group(2)) if m.group(2) else 0.5
    if C < 1:
        raise ConfigError(f"{key}: ellipsoid level C must be >= 1")
    if decay < 0.5:
        raise ConfigError(f"{key}: decay must be >= 0.5")
    return DesignFamily("ellipsoid", C, decay)


def read_pairs(text: str) -> dict[str, str]:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in pairs:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        pairs[key] = value
    return pairs


_REQUIRED = ("experiment", "n_grid", "replicates", "seed", "output_path")
_OPTIONAL = ("l_grid", "M", "design", "contraction", "control_design", "rank", "balanced", "normalize",
             "k_grid", "pool_size", "levels", "trials", "restarts", "iterations")


def parse_config(text: str) -> ExperimentConfig:
    p = read_pairs(text)
    unknown = sorted(set(p) - set(_REQUIRED) - set(_OPTIONAL))
    if unknown:
        raise ConfigError(f"unknown keys: {', '.join(unknown)}")
    missing = [k for k in _REQUIRED if k not in p]
    if missing:
        raise ConfigError(f"missing keys: {', '.join(missing)}")
    experiment = p["experiment"]
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown value {experiment!r}")
    design = parse_design(p.get("design", "sign"))
    kw = dict(
        experiment=experiment,
        n_grid=_ints("n_grid", p["n_grid"]),
        l_grid=_ints("l_grid", p["l_grid"]) if "l_grid" in p else (),
        replicates=_int("replicates", p["replicates"], 2),
        seed=parse_seed(p["seed"]),
        output_path=p["output_path"],
        design=design,
    )
    if not kw["output_path"]:
        raise ConfigError("output_path: must be non-empty")
    if "M" in p:
        kw["M"] = _float("M", p["M"])
    if "contraction" in p:
        try:
            get_contraction(p["contraction"])
        except KeyError as exc:
            raise ConfigError(f"contraction: {exc.args[0]}") from None
        kw["contraction"] = p["contraction"]
    if "control_design" in p:
        kw["control_design"] = parse_design(p["control_design"], "control_design")
    if "rank" in p:
        kw["rank"] = _int("rank", p["rank"])
    if "balanced" in p:
        kw["balanced"] = _bool("balanced", p["balanced"])
    if "normalize" in p:
        if p["normalize"] not in NORMALIZE_MODES:
            raise ConfigError(f"normalize: expected one of {NORMALIZE_MODES}")
        kw["normalize"] = p["normalize"]
    if "k_grid" in p:
        kw["k_grid"] = _ints("k_grid", p["k_grid"])
    for key, minimum in (("pool_size", 1), ("levels", 0), ("trials", 1), ("restarts", 0), ("iterations", 1)):
        if key in p:
            kw[key] = _int(key, p[key], minimum)
    cfg = ExperimentConfig(**kw)
    validate_config(cfg)
    return cfg


def load_config(path) -> ExperimentConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def validate_config(cfg: ExperimentConfig) -> None:
    """Cross-field checks; raises ConfigError."""
    e = cfg.experiment
    needs_l = not (e == "scaling_thm12" and cfg.design.kind == "identity")
    if needs_l and not cfg.l_grid:
        raise ConfigError("l_grid: required for this experiment and design")
    if cfg.design.kind == "identity" and cfg.l_grid and set(cfg.l_grid) != set(cfg.n_grid):
        raise ConfigError("identity design needs l = n; omit l_grid or repeat n_grid")
    if cfg.rank is not None and cfg.rank > min(cfg.n_grid):
        raise ConfigError("rank exceeds the smallest n in n_grid")
    if e == "scaling_thm12":
        if cfg.contraction is not None:
            raise ConfigError("scaling_thm12 uses linear classes; remove contraction")
    elif e == "correlated_thm13":
        if cfg.design.kind != "ellipsoid":
            raise ConfigError("correlated_thm13 needs design = ellipsoid(C[, decay])")
        if cfg.contraction is None:
            raise ConfigError("correlated_thm13 needs a contraction")
        if any(l % 2 for l in cfg.l_grid):
            raise ConfigError("correlated_thm13 splits l evenly between two blocks; l must be even")
        if cfg.control_design is not None and not cfg.control_design.linear_only:
            raise ConfigError("control_design must be sign or gaussian")
    elif e == "maurey_check":
        if not cfg.k_grid:
            raise ConfigError("maurey_check needs k_grid")
    elif e == "chaining_check":
        if cfg.levels > 6:
            raise ConfigError("levels must be <= 6")
        if not 2 <= cfg.pool_size <= 200:
            raise ConfigError("chaining_check needs pool_size in [2, 200]")
    elif e == "gamma_check":
        if not 2 <= cfg.pool_size <= 8:
            raise ConfigError("gamma_check grid search needs pool_size in [2, 8]")
    if cfg.design.kind == "identity" and e not in ("scaling_thm12",):
        raise ConfigError("identity design is only used by scaling_thm12")
