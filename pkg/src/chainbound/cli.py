"""Command line entry point: ``chainbound run|validate|selftest``.

Exit codes: 0 success, 1 invariant failure, 2 config error.
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from importlib import resources
from pathlib import Path

import numpy as np

from .config import load_config, parse_seed
from .errors import ConfigError

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG = 0, 1, 2


def bundled_configs() -> dict[str, Path]:
    root = resources.files("chainbound") / "configs"
    return {p.name[:-4]: Path(str(p)) for p in root.iterdir() if p.name.endswith(".cfg")}


def resolve_config_path(arg: str) -> Path:
    """A filesystem path, or the name of a bundled config (with or without ``.cfg``)."""
    p = Path(arg)
    if p.exists():
        return p
    name = p.name[:-4] if p.name.endswith(".cfg") else p.name
    bundled = bundled_configs()
    if str(p.parent) == "." and name in bundled:
        return bundled[name]
    return p


def _jobs(value: str) -> int:
    j = int(value)
    if j < 1:
        raise argparse.ArgumentTypeError("--jobs must be >= 1")
    return j


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chainbound", description="Suprema of Rademacher processes over l1-balls.")
    sub = ap.add_subparsers(dest="verb", required=True)
    run = sub.add_parser("run", help="run an experiment config and write its CSV")
    run.add_argument("config")
    run.add_argument("--seed", help="override the config seed (s or s:stream)")
    run.add_argument("--out", help="override output_path")
    run.add_argument("--jobs", type=_jobs, help="parallel cells (default: $CHAINBOUND_JOBS or 1)")
    val = sub.add_parser("validate", help="parse and check a config without running it")
    val.add_argument("config")
    sub.add_parser("selftest", help="quick internal consistency checks")
    return ap


def cmd_run(args) -> int:
    from .experiments import run_experiment, summarize, write_report_csv

    cfg = load_config(resolve_config_path(args.config))
    cfg = cfg.with_overrides(parse_seed(args.seed) if args.seed else None, args.out)
    jobs = args.jobs
    if jobs is None and os.environ.get("CHAINBOUND_JOBS"):
        try:
            jobs = _jobs(os.environ["CHAINBOUND_JOBS"])
        except (ValueError, argparse.ArgumentTypeError):
            raise ConfigError("CHAINBOUND_JOBS must be a positive integer") from None
    report = run_experiment(cfg, jobs or 1)
    out = Path(cfg.output_path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="", encoding="utf-8") as fh:
        write_report_csv(report, fh)
    print(f"wrote {len(report.rows)} rows to {out}")
    for line in summarize(report):
        print(line)
    for f in report.failures:
        print(f"INVARIANT FAILED: {f}", file=sys.stderr)
    return EXIT_OK if report.ok else EXIT_INVARIANT


def cmd_validate(args) -> int:
    cfg = load_config(resolve_config_path(args.config))
    print(f"ok: {cfg.experiment} with {len(cfg.n_grid)} n values, output {cfg.output_path}")
    return EXIT_OK


def selftest_checks():
    """Yield (name, passed) for a small battery of fast checks."""
    from .chaining import build_nested_nets, check_hierarchy, dudley_integral, ellipsoid_gamma2_bound
    from .design import gen_gaussian_design, identity_design
    from .function_class import LinearClass
    from .geometry import _greedy_indices, distance_matrix, maurey_sparsify, min_cover_size
    from .rng import Pcg32, RngSeed, substream
    from .suprema import exact_sup_linear, mc_esup

    g = Pcg32(RngSeed(42, 54))
    yield "pcg32 reference stream", [g.next_u32() for _ in range(3)] == [0xa15c02b7, 0x7b47f409, 0xba1d3330]

    ok = True
    for i in range(50):
        s = substream(RngSeed(7), i)
        X = gen_gaussian_design(4, 3, s)
        eps = Pcg32(substream(s, 1)).signs(4).astype(float)
        val, _ = exact_sup_linear(X, eps, 1.5)
        brute = max(abs(s_ * 1.5 * float(eps @ X.entries[:, j])) for j in range(3) for s_ in (1, -1))
        ok &= abs(val - brute) <= 1e-12
    yield "exact linear supremum", ok

    est = mc_esup(LinearClass(identity_design(16)), 1.0, 50, RngSeed(1))
    yield "identity closed form", est.mean == 4.0 and est.std_error == 0.0

    ok = True
    for i in range(20):
        P = Pcg32(substream(RngSeed(8), i)).normal(16).reshape(8, 2)
        D = distance_matrix(list(P))
        eps = 0.8
        ok &= min_cover_size(D, eps) <= len(_greedy_indices(D, eps)) <= min_cover_size(D, eps / 2)
    yield "packing sandwich", ok

    ok = True
    for i in range(10):
        P = Pcg32(substream(RngSeed(9), i)).normal(60).reshape(30, 2)
        D = distance_matrix(list(P))
        ok &= not check_hierarchy(build_nested_nets(range(30), None, float(D.max()), 4, distances=D), D)
    yield "net invariants", ok

    val = dudley_integral(lambda e: math.log1p(5), 0.25, 2.0)
    yield "constant Dudley integral", abs(val - 1.75 * math.sqrt(math.log(6))) <= 1e-9

    n = 10
    yield "ellipsoid gamma_2 shape", math.isclose(
        ellipsoid_gamma2_bound(np.sqrt(4.0 * n / np.arange(1, n + 1))), 2 * math.sqrt(n), rel_tol=1e-12)

    theta = np.zeros(5)
    theta[0] = 2.0
    yield "Maurey at a vertex", bool(np.all(maurey_sparsify(theta, 2.0, 7, RngSeed(3)) == theta))


def cmd_selftest(args) -> int:
    ok = True
    for name, passed in selftest_checks():
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
        ok &= bool(passed)
    return EXIT_OK if ok else EXIT_INVARIANT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"run": cmd_run, "validate": cmd_validate, "selftest": cmd_selftest}[args.verb]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
