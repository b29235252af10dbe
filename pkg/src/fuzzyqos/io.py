"""Scenario config files and CSV/JSON output."""

from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable

from .admission import AdmissionMode
from .allocator import AllocationPolicySet
from .errors import ConfigurationError
from .experiments import DEFAULT_RHOS, DEFAULT_RUNS, SweepSpec
from .metrics import RunStats
from .netsim import DEFAULT_BITRATES, DEFAULT_RATES, DEFAULT_REQUESTS, RunConfig

CONFIG_KEYS = {
    "seed", "rho", "modes", "total_bandwidth", "shares", "bitrates", "arrival_rates",
    "requests", "sample_interval", "rules", "policies", "runs", "ewma_alpha",
}


def load_config(path: str | Path | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    try:
        cfg = json.loads(p.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"{path}: {e}") from None
    unknown = set(cfg) - CONFIG_KEYS
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    return cfg


def sweep_spec(cfg: dict) -> SweepSpec:
    """Build a SweepSpec from a parsed config dict, filling defaults."""
    rhos = cfg.get("rho", list(DEFAULT_RHOS))
    if not isinstance(rhos, list):
        rhos = [rhos]
    modes = [AdmissionMode.parse(m) for m in cfg.get("modes", [m.value for m in AdmissionMode])]
    k_requests = cfg.get("requests", list(DEFAULT_REQUESTS))
    if isinstance(k_requests, int):
        k_requests = [k_requests] * len(cfg.get("shares", (0.3, 0.4, 0.3)))
    policy = AllocationPolicySet(cfg.get("total_bandwidth", 6400.0), tuple(cfg.get("shares", (0.3, 0.4, 0.3))))
    base = RunConfig(
        seed=int(cfg.get("seed", 0)),
        rho=float(rhos[0]),
        mode=modes[0],
        sample_interval=float(cfg.get("sample_interval", 10.0)),
        policy=policy,
        bitrates=tuple(float(b) for b in cfg.get("bitrates", DEFAULT_BITRATES)),
        rates=tuple(float(r) for r in cfg.get("arrival_rates", DEFAULT_RATES)),
        requests=tuple(int(n) for n in k_requests),
        rules_path=cfg.get("rules"),
        policies_path=cfg.get("policies"),
        ewma_alpha=cfg.get("ewma_alpha"),
    )
    return SweepSpec(base, tuple(float(r) for r in rhos), tuple(modes), int(cfg.get("runs", DEFAULT_RUNS)))


def write_csv(path: Path, header: list[str], rows: Iterable[Iterable]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)


def write_timeseries(path: Path, stats: RunStats) -> None:
    k = len(stats.generated)
    header = ["time", *[f"b_{j}" for j in range(1, k + 1)], "total", "utilization"]
    write_csv(path, header, stats.timeseries)
