"""Command-line driver: ``fuzzyqos {run,sweep,validate,scenario-5-3-2,emit-plots}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from .admission import AdmissionMode
from .errors import FuzzyQosError
from .experiments import (
    SweepSpec,
    compare_to_oracle,
    load_reports,
    run_name,
    sweep,
    write_reports,
)
from .io import load_config, sweep_spec, write_csv, write_timeseries
from .marking import MarkingConfig, run_marking
from .netsim import load_policies, run_scenario

log = logging.getLogger("fuzzyqos")


def _floats(text: str) -> list[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _modes(text: str) -> list[AdmissionMode]:
    return [AdmissionMode.parse(x) for x in text.split(",") if x.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario JSON config")
    common.add_argument("--seed", type=int, help="base seed (runs use seed, seed+1, ...)")
    common.add_argument("--rho", type=_floats, help="comma-separated load ratios")
    common.add_argument("--mode", type=_modes, help="comma-separated modes: class-agnostic,base-policy,frb")
    common.add_argument("--runs", type=int, help="seeds per (mode, rho)")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--rules", help="FRB rule file")
    common.add_argument("--policies", help="policy file evaluated at every sample")
    common.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="fuzzyqos", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="execute one run")
    sub.add_parser("sweep", parents=[common], help="modes x rho x seeds, write a report")
    sub.add_parser("validate", parents=[common], help="compare non-fuzzy modes with the exact oracle")
    sub.add_parser("scenario-5-3-2", parents=[common], help="adaptive EF-marking fluid-link run")
    sub.add_parser("emit-plots", parents=[common], help="write figure data series as CSV")
    return p


def _spec(args) -> SweepSpec:
    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.rho is not None:
        cfg["rho"] = args.rho
    if args.mode is not None:
        cfg["modes"] = [m.value for m in args.mode]
    if args.runs is not None:
        cfg["runs"] = args.runs
    if args.rules is not None:
        cfg["rules"] = args.rules
    if args.policies is not None:
        cfg["policies"] = args.policies
    spec = sweep_spec(cfg)
    # surface configuration errors before any event runs
    if AdmissionMode.FRB_ADAPTIVE in spec.modes:
        from .allocator import build_frb
        from .netsim import load_rules

        build_frb(spec.base.policy, load_rules(spec.base.rules_path))
    load_policies(spec.base.policies_path)
    return spec


def cmd_run(args) -> int:
    spec = _spec(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    cfg = spec.base.with_(rho=spec.rhos[0], mode=spec.modes[0])
    stats = run_scenario(cfg)
    name = run_name(stats)
    (out / f"runstats_{name}.json").write_text(stats.to_json())
    write_timeseries(out / f"timeseries_{name}.csv", stats)
    from .metrics import availability, blocking_per_class

    print(f"{name}: availability={availability(stats):.4f} blocking={[round(b, 4) for b in blocking_per_class(stats)]}")
    return 0


def cmd_sweep(args) -> int:
    spec = _spec(args)
    spec = replace(spec, base=spec.base.with_(record_decisions=False))
    grouped = sweep(spec, args.jobs)
    reps = write_reports(Path(args.out), grouped)
    for r in reps:
        print(f"{r.mode:15s} rho={r.rho:<4} availability={r.availability:.4f} blocking={[round(b, 4) for b in r.blocking]}")
    return 0


def cmd_validate(args) -> int:
    spec = _spec(args)
    modes = tuple(m for m in spec.modes if m is not AdmissionMode.FRB_ADAPTIVE)
    if not modes:
        modes = (AdmissionMode.CLASS_AGNOSTIC, AdmissionMode.BASE_POLICY)
    spec = replace(spec, modes=modes, base=spec.base.with_(record_decisions=False))
    grouped = sweep(spec, args.jobs)
    checks = []
    for (mode, rho), runs in sorted(grouped.items()):
        checks += compare_to_oracle(spec.base, rho, AdmissionMode(mode), runs)
    for c in checks:
        print(c.line())
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "validation.json").write_text(json.dumps([c.__dict__ for c in checks], indent=1))
    ok = all(c.passed for c in checks)
    print("validation", "passed" if ok else "FAILED")
    return 0 if ok else 1


def cmd_marking(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    base = MarkingConfig(seed=args.seed if args.seed is not None else MarkingConfig.seed)
    rules = load_policies(args.policies) if args.policies else None
    summary = {}
    for label, enabled in (("enabled", True), ("disabled", False)):
        res = run_marking(replace(base, policy_enabled=enabled), rules)
        write_csv(
            out / f"marking_{label}.csv",
            ["time", "background_demand", "background_throughput", "test_throughput", "utilization", "test_dscp"],
            res.series,
        )
        th = res.test_throughput()
        summary[label] = {
            "trigger_time": res.trigger_time,
            "marked_time": res.marked_time,
            "min_test_throughput": float(th.min()),
            "actions": res.actions,
        }
        print(f"policy {label}: trigger={res.trigger_time} marked={res.marked_time} min test throughput={th.min():.1f}")
    (out / "marking.json").write_text(json.dumps(summary, indent=1))
    return 0


def cmd_emit_plots(args) -> int:
    out = Path(args.out)
    report = out / "report.json"
    if report.is_file() and args.config is None and args.rho is None:
        reps = load_reports(report)
    else:
        spec = _spec(args)
        grouped = sweep(replace(spec, base=spec.base.with_(record_decisions=False)), args.jobs)
        reps = write_reports(out, grouped, timeseries=False)
    modes = sorted({r.mode for r in reps})
    rhos = sorted({r.rho for r in reps})
    by = {(r.mode, r.rho): r for r in reps}
    write_csv(
        out / "plot_availability.csv",
        ["rho", *modes],
        [[rho, *[by[(m, rho)].availability if (m, rho) in by else "" for m in modes]] for rho in rhos],
    )
    k = len(reps[0].blocking)
    for j in range(k):
        write_csv(
            out / f"plot_blocking_class{j + 1}.csv",
            ["rho", *modes],
            [[rho, *[by[(m, rho)].blocking[j] if (m, rho) in by else "" for m in modes]] for rho in rhos],
        )
    rho0 = min(rhos)
    write_csv(
        out / f"plot_utilization_cdf_rho{rho0}.csv",
        ["mode", "utilization", "cdf"],
        [[m, u, f] for m in modes if (m, rho0) in by for u, f in by[(m, rho0)].cdf],
    )
    print(f"wrote plot series for {len(modes)} modes x {len(rhos)} rho values to {out}")
    return 0


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
    "scenario-5-3-2": cmd_marking,
    "emit-plots": cmd_emit_plots,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except FuzzyQosError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
