"""Command-line front end.

Subcommands: schemes (list/show the catalog), analyze (stability and
error profile of one scheme), optimize (coefficient searches), sample
(run one chain), reproduce (the benchmark presets).  Global flags --seed,
--threads, --out and --full apply where they make sense and are ignored
elsewhere.  Exit codes: 0 on success, 2 on usage errors (argparse), 3 on
runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import harmonic, optimize
from .experiments import (
    DEFAULT_SEED,
    ExperimentPlan,
    bench_nongaussian,
    reproduce_fig2,
    reproduce_fig3,
    reproduce_fig4_fig5,
    run_plan,
)
from .hmc import HmcConfig, hmc_run
from .schemes import (
    catalog,
    catalog_names,
    make_four_stage,
    make_three_stage,
    make_two_stage,
)
from .targets import parse_target

__all__ = [
    "main",
    "ExperimentPlan",
    "run_plan",
    "reproduce_fig2",
    "reproduce_fig3",
    "reproduce_fig4_fig5",
    "bench_nongaussian",
]


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="splithmc",
        description="palindromic splitting integrators for HMC: analysis, "
                    "optimization, sampling, benchmark presets",
    )
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=1,
                   help="worker processes for replicated runs")
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--full", action="store_true",
                   help="publication-scale sizes instead of CI-sized defaults")
    sub = p.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("schemes", help="list or show catalog schemes")
    sp.add_argument("action", choices=["list", "show"])
    sp.add_argument("--scheme", help="label, required for show")

    ap = sub.add_parser("analyze", help="harmonic diagnostics over a step-size grid")
    ap.add_argument("--scheme", required=True)
    ap.add_argument("--hbar", type=float, required=True)
    ap.add_argument("--points", type=int, default=512)

    op = sub.add_parser("optimize", help="coefficient searches")
    op.add_argument("--family", required=True,
                    choices=["two_stage", "three_stage", "four_stage", "error_metric"])
    op.add_argument("--hbar", type=float, default=None)
    op.add_argument("--metric", default="E", choices=["E", "Estar"])

    smp = sub.add_parser("sample", help="run one chain and summarize it")
    smp.add_argument("--scheme", required=True)
    smp.add_argument("--target", required=True,
                     help="chain:<d>, dwell, or diag:<w1,w2,...>")
    smp.add_argument("--h0", type=float, required=True)
    smp.add_argument("--steps", type=int, required=True)
    smp.add_argument("--n", type=int, required=True, help="kept proposals")
    smp.add_argument("--burn-in", type=int, default=0)
    smp.add_argument("--jitter", type=float, default=0.2)
    smp.add_argument("--record", action="store_true",
                     help="also write per-step records as CSV")

    rp = sub.add_parser("reproduce", help="benchmark presets")
    rp.add_argument("figure", choices=["fig2", "fig3", "fig4", "fig5", "bench"])

    return p


def _cmd_schemes(args) -> int:
    if args.action == "list":
        for name in catalog_names():
            s = catalog(name)
            print(f"{name}: {s.leading_kind.value}, {s.stage_count} stages")
        return 0
    if not args.scheme:
        print("schemes show needs --scheme", file=sys.stderr)
        return 2
    print(catalog(args.scheme).to_json())
    return 0


def _cmd_analyze(args) -> int:
    scheme = catalog(args.scheme)
    if args.hbar <= 0:
        raise ValueError("--hbar must be positive")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    n = max(int(args.points), 8)
    hs = np.linspace(args.hbar / n, args.hbar, n)
    csv_path = out / f"analyze_{scheme.label}.csv"
    with open(csv_path, "w", newline="") as f:
        f.write(f"# scheme {scheme.label}, h_bar {args.hbar!r}\n")
        w = csv.writer(f)
        w.writerow(["h", "a_h", "b_h", "c_h", "theta", "chi", "rho", "stable"])
        for h in hs:
            u = harmonic.harmonic_update(scheme, float(h))
            d = harmonic.diagnostics(scheme, float(h))
            w.writerow([u.h, u.a_h, u.b_h, u.c_h, d.theta, d.chi, d.rho,
                        int(d.stable)])
    constants = harmonic.error_constants(scheme)
    info = {
        "scheme": scheme.label,
        "h_bar": args.hbar,
        "rho_norm": _json_num(harmonic.rho_norm(scheme, args.hbar)),
        "stability_interval": harmonic.stability_interval(scheme),
        "k31": constants.k31,
        "k32": constants.k32,
    }
    json_path = out / f"analyze_{scheme.label}.json"
    json_path.write_text(json.dumps(info, indent=2) + "\n")
    print(str(csv_path))
    print(str(json_path))
    return 0


def _json_num(x: float):
    return float(x) if math.isfinite(x) else None


def _cmd_optimize(args) -> int:
    if args.family == "two_stage":
        report = optimize.optimize_two_stage(args.hbar if args.hbar else 2.0)
        scheme = make_two_stage(*report.argmin).with_label(
            f"opt2@{report.h_bar:g}")
    elif args.family == "three_stage":
        report = optimize.optimize_three_stage(args.hbar if args.hbar else 3.0)
        scheme = make_three_stage(*report.argmin).with_label(
            f"opt3@{report.h_bar:g}")
    elif args.family == "four_stage":
        report = optimize.optimize_four_stage(args.hbar if args.hbar else 4.0)
        scheme = make_four_stage(*report.argmin).with_label(
            f"opt4@{report.h_bar:g}")
    else:
        report = optimize.minimize_error_metric_two_stage(args.metric)
        scheme = make_two_stage(*report.argmin).with_label(f"min{args.metric}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report_path = out / f"optimize_{args.family}.json"
    report_path.write_text(report.to_json() + "\n")
    catalog_path = out / "optimized_schemes.json"
    entries = []
    if catalog_path.exists():
        entries = json.loads(catalog_path.read_text())
    entries.append({"scheme": scheme.as_dict(), "report": report.as_dict()})
    catalog_path.write_text(json.dumps(entries, indent=2) + "\n")
    print(report.to_json())
    print(str(report_path))
    print(str(catalog_path))
    return 0


def _cmd_sample(args) -> int:
    scheme = catalog(args.scheme)
    target = parse_target(args.target)
    config = HmcConfig(
        h0=args.h0,
        steps_per_proposal=args.steps,
        chain_length=args.n,
        jitter=args.jitter,
        burn_in=args.burn_in,
        seed=args.seed,
    )
    summary = hmc_run(scheme, target, config, record=args.record)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    json_path = out / "sample_summary.json"
    json_path.write_text(summary.to_json() + "\n")
    print(summary.to_json())
    print(str(json_path))
    if args.record:
        csv_path = out / "sample_records.csv"
        with open(csv_path, "w", newline="") as f:
            f.write(f"# scheme {scheme.label}, target {target.name}, "
                    f"seed {args.seed}\n")
            w = csv.writer(f)
            w.writerow(["step", "h_used", "delta", "accepted"])
            for rec in summary.per_step_records:
                w.writerow([rec.step, rec.h_used, rec.delta, int(rec.accepted)])
        print(str(csv_path))
    return 0


def _cmd_reproduce(args) -> int:
    kwargs = dict(out_dir=args.out, seed=args.seed, threads=args.threads,
                  full=args.full)
    if args.figure == "fig2":
        paths = reproduce_fig2(**kwargs)
    elif args.figure == "fig3":
        paths = reproduce_fig3(**kwargs)
    elif args.figure in ("fig4", "fig5"):
        paths = reproduce_fig4_fig5(args.figure, **kwargs)
    else:
        paths = bench_nongaussian(**kwargs)
    for v in paths.values():
        if isinstance(v, str):
            print(v)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handlers = {
        "schemes": _cmd_schemes,
        "analyze": _cmd_analyze,
        "optimize": _cmd_optimize,
        "sample": _cmd_sample,
        "reproduce": _cmd_reproduce,
    }
    try:
        return handlers[args.command](args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
