"""Desk-scale experiments producing one report row per grid cell.

Each experiment splits into independent cells.  A cell derives every random
stream from ``(seed, tag, n, l, ...)``, so its output does not depend on the
other cells or on the order in which cells finish.
"""

from __future__ import annotations

import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .bounds import implied_constant, shape_thm12, shape_thm13
from .chaining import (build_nested_nets, chain_bound, check_hierarchy, dudley_integral,
                       ellipsoid_gamma2_bound, gamma_beta_grid, packing_log_function, subset_gamma_check)
from .config import DesignFamily, ExperimentConfig
from .design import (ellipsoid_score, envelope_spec, fit_rotation, gen_ellipsoid_design,
                     gen_gaussian_design, gen_sign_design, identity_design, random_rotation)
from .function_class import CompositeClass, LinearClass, get_contraction, lipschitz_A_spectral, radius_A
from .geometry import distance_matrix, l1_ball_pool, maurey_sparsify
from .rng import Pcg32, substream
from .suprema import mc_esup, mc_esup_finite

SCHEMA_VERSION = 1
CSV_COLUMNS = ("schema_version", "experiment", "n", "l", "design", "esup_mean", "esup_se",
               "shape_name", "shape_value", "implied_K", "detail")
GAMMA_SLACK = 1.05
MAUREY_SLACK = 1.1
SCORE_RTOL = 1e-9

# stream tags
_DESIGN, _SIGNS, _ROTATION, _SECOND, _THETA, _POOL, _SUBSET, _ENVELOPE = range(1, 9)


@dataclass
class ReportRow:
    experiment: str
    n: int
    l: int
    design: str
    esup_mean: float
    esup_se: float
    shape_name: str
    shape_value: float
    implied_K: float
    detail: dict = field(default_factory=dict)

    def csv_fields(self) -> list[str]:
        return [str(SCHEMA_VERSION), self.experiment, str(self.n), str(self.l), self.design,
                repr(float(self.esup_mean)), repr(float(self.esup_se)), self.shape_name,
                repr(float(self.shape_value)), repr(float(self.implied_K)), format_detail(self.detail)]


@dataclass
class BoundReport:
    rows: list[ReportRow]
    failures: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.failures


def format_detail(detail: dict) -> str:
    parts = []
    for k, v in detail.items():
        parts.append(f"{k}={v!r}" if isinstance(v, float) else f"{k}={v}")
    return ";".join(parts)


def make_row(experiment, n, l, design, esup_mean, esup_se, shape_name, shape_value, **detail) -> ReportRow:
    esup_mean, shape_value = float(esup_mean), float(shape_value)
    return ReportRow(experiment, n, l, design, esup_mean, float(esup_se), shape_name, shape_value,
                     implied_constant(esup_mean, shape_value), detail)


def write_report_csv(report: BoundReport, fh) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in report.rows:
        w.writerow(row.csv_fields())


def read_report_csv(fh) -> list[dict]:
    return list(csv.DictReader(fh))


def expected_abs_sum(n: int) -> float:
    """E|eps_1 + ... + eps_n| for Rademacher signs, by the binomial law."""
    return math.fsum(math.comb(n, k) * abs(2 * k - n) for k in range(n + 1)) / 2.0 ** n


def build_design(family: DesignFamily, n: int, l: int, seed, cfg: ExperimentConfig):
    """(design, true rotation or None) for one cell."""
    if family.kind == "sign":
        return gen_sign_design(n, l, seed), None
    if family.kind == "gaussian":
        return gen_gaussian_design(n, l, seed), None
    if family.kind == "identity":
        return identity_design(n), None
    # one rotation per n, shared by every l in the sweep
    R = random_rotation(n, substream(cfg.seed, _ROTATION, n))
    spec = envelope_spec(n, family.C, rotation=R, decay=family.decay)
    X = gen_ellipsoid_design(n, l, spec, seed, rank=cfg.rank, balanced=cfg.balanced, normalize=cfg.normalize)
    return X, R


def _random_theta(l: int, M: float, seed) -> np.ndarray:
    g = Pcg32(seed)
    w = -np.log(1.0 - g.uniform(l))
    return M * g.signs(l) * w / w.sum()


def cells_for(cfg: ExperimentConfig) -> list[tuple]:
    e = cfg.experiment
    if e == "scaling_thm12":
        if cfg.design.kind == "identity":
            return [(n, n) for n in cfg.n_grid]
        return [(n, l) for n in cfg.n_grid for l in cfg.l_grid]
    if e == "correlated_thm13":
        fams = [cfg.design] + ([cfg.control_design] if cfg.control_design else [])
        return [(n, l, f) for f in fams for n in cfg.n_grid for l in cfg.l_grid]
    if e == "maurey_check":
        return [(n, l, k) for n in cfg.n_grid for l in cfg.l_grid for k in cfg.k_grid]
    return [(n, l) for n in cfg.n_grid for l in cfg.l_grid]


def run_scaling_thm12(cfg: ExperimentConfig, cell) -> tuple[list[ReportRow], list[str]]:
    n, l = cell
    X, _ = build_design(cfg.design, n, l, substream(cfg.seed, _DESIGN, n, l), cfg)
    # the same sign draws serve every l at this n
    est = mc_esup(LinearClass(X), cfg.M, cfg.replicates, substream(cfg.seed, _SIGNS, n))
    A = radius_A(X)
    row = make_row(cfg.experiment, n, X.l, cfg.design.label(), est.mean, est.std_error, "thm12",
                   shape_thm12(n, X.l, cfg.M, A), A=A, method=est.method)
    problems = []
    if cfg.design.kind == "identity" and (est.mean != cfg.M * math.sqrt(n) or est.std_error != 0.0):
        problems.append(f"identity n={n}: E sup {est.mean!r} differs from M sqrt(n)")
    return [row], problems


def _composite_blocks(family: DesignFamily, n: int, l: int, cfg: ExperimentConfig):
    half = l // 2
    X1, R = build_design(family, n, half, substream(cfg.seed, _DESIGN, n, l), cfg)
    X2, _ = build_design(family, n, half, substream(cfg.seed, _SECOND, n, l), cfg)
    return X1, X2, R


def run_correlated_thm13(cfg: ExperimentConfig, cell) -> tuple[list[ReportRow], list[str]]:
    n, l, family = cell
    X1, X2, R = _composite_blocks(family, n, l, cfg)
    g = get_contraction(cfg.contraction)
    cls = CompositeClass(X1, X2, g)
    est = mc_esup(cls, cfg.M, cfg.replicates, substream(cfg.seed, _SIGNS, n),
                  restarts=cfg.restarts, iterations=cfg.iterations)
    # theta_0 = 0 evaluates to g(0, 0) in every coordinate
    anchor = abs(float(g(np.zeros(1), np.zeros(1))[0])) * expected_abs_sum(n)
    detail = {"contraction": cfg.contraction, "anchor": anchor, "method": est.method}
    problems = []
    if R is not None:
        true_score = max(ellipsoid_score(X1, R), ellipsoid_score(X2, R))
        fitted = max(ellipsoid_score(X1, fit_rotation(X1)), ellipsoid_score(X2, fit_rotation(X2)))
        detail.update(score_true=true_score, score_fitted=fitted)
        if cfg.normalize == "best_effort":
            detail["flagged"] = int(X1.flagged.sum() + X2.flagged.sum())
        if true_score > family.C * (1 + SCORE_RTOL):
            problems.append(f"n={n} l={l}: design leaves the envelope, score {true_score:.6g} > C")
        if fitted > family.C * (1 + SCORE_RTOL):
            problems.append(f"n={n} l={l}: fitted-rotation score {fitted:.6g} > C={family.C!r}")
    row = make_row(cfg.experiment, n, l, family.label(), est.mean, est.std_error, "thm13",
                   shape_thm13(n, cfg.M, anchor), **detail)
    return [row], problems


def run_maurey_check(cfg: ExperimentConfig, cell) -> tuple[list[ReportRow], list[str]]:
    n, l, k = cell
    X, _ = build_design(cfg.design, n, l, substream(cfg.seed, _DESIGN, n, l), cfg)
    A = lipschitz_A_spectral(X)
    M = cfg.M
    theta = _random_theta(l, M, substream(cfg.seed, _THETA, n, l))
    target = X.entries @ theta
    d = np.empty(cfg.replicates)
    for r in range(cfg.replicates):
        y = maurey_sparsify(theta, M, k, substream(cfg.seed, _SIGNS, n, l, k, r))
        d[r] = np.linalg.norm(X.entries @ y - target)
    d2 = d ** 2
    bound = 4 * n * A ** 2 * M ** 2 / k
    min_bound = 2 * math.sqrt(n / k) * A * M
    se = float(np.std(d2, ddof=1) / math.sqrt(d2.size))
    row = make_row(cfg.experiment, n, l, cfg.design.label(), float(np.mean(d2)), se, "maurey_d2", bound,
                   k=k, A=A, min_d=float(d.min()), min_bound=min_bound)
    problems = []
    if row.esup_mean > MAUREY_SLACK * bound:
        problems.append(f"n={n} l={l} k={k}: mean d^2 {row.esup_mean:.6g} exceeds 1.1 x bound {bound:.6g}")
    if d.min() > min_bound:
        problems.append(f"n={n} l={l} k={k}: no replicate within {min_bound:.6g}")
    return [row], problems


def pool_values(cfg: ExperimentConfig, n: int, l: int, size: int, tag, include_vertices: bool):
    """Evaluation vectors (n x size) of a sampled parameter pool of a linear class."""
    X, _ = build_design(cfg.design, n, l, substream(cfg.seed, _DESIGN, n, l, *tag), cfg)
    P = np.vstack(l1_ball_pool(l, cfg.M, size, substream(cfg.seed, _POOL, n, l, *tag), include_vertices))
    return X.entries @ P.T


def run_chaining_check(cfg: ExperimentConfig, cell) -> tuple[list[ReportRow], list[str]]:
    n, l = cell
    V = pool_values(cfg, n, l, cfg.pool_size, (), True)
    D = distance_matrix(V.T)
    diam = float(D.max())
    eta = diam if diam > 0 else 1.0
    h = build_nested_nets(range(V.shape[1]), None, eta, cfg.levels, distances=D)
    problems = [f"n={n} l={l}: {p}" for p in check_hierarchy(h, D)]
    f, jumps = packing_log_function(D)
    dudley = dudley_integral(f, 0.0, eta, breakpoints=jumps)
    est = mc_esup_finite(V, cfg.replicates, substream(cfg.seed, _SIGNS, n, l))
    sizes = "/".join(str(len(lev)) for lev in h.levels)
    row = make_row(cfg.experiment, n, l, cfg.design.label(), est.mean, est.std_error, "chain", chain_bound(h),
                   pool=V.shape[1], eta=eta, level_sizes=sizes, dudley=dudley, violations=len(problems))
    return [row], problems


def run_gamma_check(cfg: ExperimentConfig, cell) -> tuple[list[ReportRow], list[str]]:
    n, l = cell
    rows, problems = [], []
    m = cfg.pool_size
    for t in range(cfg.trials):
        V = pool_values(cfg, n, l, m, (t,), False)
        D = distance_matrix(V.T)
        g1 = gamma_beta_grid(D, 1.0)
        g2 = gamma_beta_grid(D, 2.0)
        pick = Pcg32(substream(cfg.seed, _SUBSET, n, l, t))
        size = 1 + pick.below(m - 1) if m > 1 else 1
        subset = sorted(int(i) for i in np.argsort(pick.uniform(m), kind="stable")[:size])
        gS, gT = subset_gamma_check(list(V.T), subset, None, 1.0, distances=D)
        if gS > 2.0 * gT * GAMMA_SLACK:
            problems.append(f"n={n} l={l} trial {t}: gamma_1(S)={gS:.6g} > 2 gamma_1(T)={2 * gT:.6g}")
        est = mc_esup_finite(V, cfg.replicates, substream(cfg.seed, _SIGNS, n, l, t))
        rows.append(make_row(cfg.experiment, n, l, cfg.design.label(), est.mean, est.std_error, "gamma1_grid", g1,
                             trial=t, gamma2=g2, subset="/".join(map(str, subset)), gamma1_subset=gS))
    # the envelope ellipsoid at level 4 scaled by M
    a = 2.0 * cfg.M * math.sqrt(n) / np.sqrt(np.arange(1, n + 1))
    R = random_rotation(n, substream(cfg.seed, _ROTATION, n))
    spec = envelope_spec(n, 4.0, rotation=R)
    X = gen_ellipsoid_design(n, l, spec, substream(cfg.seed, _ENVELOPE, n, l))
    est = mc_esup(LinearClass(X), cfg.M, cfg.replicates, substream(cfg.seed, _SIGNS, n, l, cfg.trials))
    rows.append(make_row(cfg.experiment, n, l, "ellipsoid(4.0,0.5)", est.mean, est.std_error, "ellipsoid_gamma2",
                         ellipsoid_gamma2_bound(a)))
    return rows, problems


RUNNERS = {
    "scaling_thm12": run_scaling_thm12,
    "correlated_thm13": run_correlated_thm13,
    "maurey_check": run_maurey_check,
    "chaining_check": run_chaining_check,
    "gamma_check": run_gamma_check,
}


def _run_cell(args):
    cfg, cell = args
    return RUNNERS[cfg.experiment](cfg, cell)


def resolve_jobs(jobs: int | None) -> int:
    if jobs is None:
        env = os.environ.get("CHAINBOUND_JOBS")
        jobs = int(env) if env else 1
    return max(1, int(jobs))


def run_experiment(cfg: ExperimentConfig, jobs: int | None = None) -> BoundReport:
    """Run every cell (in parallel when ``jobs > 1``) and gather rows in grid order."""
    cells = cells_for(cfg)
    jobs = min(resolve_jobs(jobs), len(cells))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_cell, [(cfg, c) for c in cells]))
    else:
        results = [_run_cell((cfg, c)) for c in cells]
    report = BoundReport([])
    for rows, problems in results:
        report.rows.extend(rows)
        report.failures.extend(problems)
    report.failures.extend(check_rows(report.rows))
    return report


def check_rows(rows) -> list[str]:
    """Row-level invariants: finite values and implied_K = esup_mean / shape_value."""
    bad = []
    for i, r in enumerate(rows):
        if not all(math.isfinite(v) for v in (r.esup_mean, r.esup_se, r.shape_value, r.implied_K)):
            bad.append(f"row {i}: non-finite value")
        elif r.implied_K != r.esup_mean / r.shape_value:
            bad.append(f"row {i}: implied_K does not match esup_mean / shape_value")
    return bad


def summarize(report: BoundReport) -> list[str]:
    """Human-readable spread and growth lines per (experiment, design, n)."""
    groups: dict[tuple, list[ReportRow]] = {}
    for r in report.rows:
        groups.setdefault((r.experiment, r.design, r.shape_name, r.n), []).append(r)
    lines = []
    for (exp, design, shape, n), rows in groups.items():
        ks = [r.implied_K for r in rows]
        if len(ks) < 2:
            continue
        lines.append(f"{exp} {design} {shape} n={n}: implied_K min {min(ks):.4g} max {max(ks):.4g} "
                     f"max/min {max(ks) / min(ks):.4g} last/first {ks[-1] / ks[0]:.4g}")
    return lines


def band_ratio(rows) -> float:
    ks = [r.implied_K for r in rows]
    return max(ks) / min(ks)
