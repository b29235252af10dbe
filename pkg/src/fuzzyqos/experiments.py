"""Sweeps over load ratio, admission mode and seed, plus oracle validation."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .admission import AdmissionMode
from .errors import ConfigurationError
from .metrics import RunStats, ScenarioReport, oracle_inputs, product_form_oracle
from .netsim import RunConfig, lifetime_from_rho, run_scenario

DEFAULT_RHOS = (0.2, 0.4, 0.6, 0.8)
DEFAULT_RUNS = 10


@dataclass(frozen=True)
class SweepSpec:
    base: RunConfig
    rhos: tuple[float, ...] = DEFAULT_RHOS
    modes: tuple[AdmissionMode, ...] = tuple(AdmissionMode)
    runs: int = DEFAULT_RUNS

    def configs(self) -> list[RunConfig]:
        return [
            self.base.with_(rho=rho, mode=mode, seed=self.base.seed + i)
            for mode in self.modes
            for rho in self.rhos
            for i in range(self.runs)
        ]


def _run(cfg: RunConfig) -> RunStats:
    return run_scenario(cfg)


def run_many(configs: Sequence[RunConfig], jobs: int = 1) -> list[RunStats]:
    if jobs <= 1:
        return [_run(c) for c in configs]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_run, configs, chunksize=1))


def sweep(spec: SweepSpec, jobs: int = 1) -> dict[tuple[str, float], list[RunStats]]:
    """Run every (mode, rho, seed) combination, grouped by (mode, rho)."""
    configs = spec.configs()
    results = run_many(configs, jobs)
    grouped: dict[tuple[str, float], list[RunStats]] = {}
    for cfg, stats in zip(configs, results):
        grouped.setdefault((cfg.mode.value, cfg.rho), []).append(stats)
    return grouped


def reports(grouped: dict[tuple[str, float], list[RunStats]]) -> list[ScenarioReport]:
    return [ScenarioReport.from_runs(mode, rho, runs) for (mode, rho), runs in grouped.items()]


def oracle_blocking(base: RunConfig, rho: float, mode: AdmissionMode) -> list[float]:
    """Exact blocking for the non-fuzzy modes (loss system in bandwidth units)."""
    if mode is AdmissionMode.FRB_ADAPTIVE:
        raise ConfigurationError("no product-form oracle for the FRB mode")
    k = base.policy.n_classes
    lifetimes = [lifetime_from_rho(rho, j, base.policy, base.bitrates, base.rates) for j in range(1, k + 1)]
    args = oracle_inputs(
        lifetimes,
        base.rates,
        base.bitrates,
        base.policy.total,
        base.policy.base if mode is AdmissionMode.BASE_POLICY else None,
    )
    return product_form_oracle(**args)


@dataclass(frozen=True)
class OracleCheck:
    mode: str
    rho: float
    class_id: int
    simulated: float
    oracle: float
    se: float
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.mode} rho={self.rho} class {self.class_id}: "
            f"sim={self.simulated:.5f} oracle={self.oracle:.5f} 3se={3 * self.se:.5f}"
        )


def compare_to_oracle(
    base: RunConfig, rho: float, mode: AdmissionMode, runs: Sequence[RunStats], n_se: float = 3.0
) -> list[OracleCheck]:
    """Per-class check |sim - oracle| <= n_se * SE.

    SE is the spread of run-level blocking means, floored by the binomial
    standard error of the oracle probability over all pooled requests, so
    classes that never block in any run are still judged.
    """
    rep = ScenarioReport.from_runs(mode.value, rho, runs)
    exact = oracle_blocking(base, rho, mode)
    out = []
    for j, (sim, se_runs, p) in enumerate(zip(rep.blocking, rep.blocking_se, exact), start=1):
        n = sum(r.generated[j - 1] for r in runs)
        se = max(se_runs, math.sqrt(p * (1 - p) / n))
        out.append(OracleCheck(mode.value, rho, j, sim, p, se, abs(sim - p) <= n_se * se))
    return out


def write_reports(out: Path, grouped: dict[tuple[str, float], list[RunStats]], timeseries: bool = True) -> list[ScenarioReport]:
    from .io import write_csv, write_timeseries

    out.mkdir(parents=True, exist_ok=True)
    reps = sorted(reports(grouped), key=lambda r: (r.mode, r.rho))
    (out / "report.json").write_text(json.dumps([r.to_dict() for r in reps], indent=1, sort_keys=True))
    write_csv(
        out / "availability.csv",
        ["mode", "rho", "runs", "availability", "se"],
        [[r.mode, r.rho, r.runs, r.availability, r.availability_se] for r in reps],
    )
    write_csv(
        out / "blocking.csv",
        ["mode", "rho", "class", "blocking", "se"],
        [[r.mode, r.rho, j, b, s] for r in reps for j, (b, s) in enumerate(zip(r.blocking, r.blocking_se), start=1)],
    )
    write_csv(
        out / "utilization_cdf.csv",
        ["mode", "rho", "utilization", "cdf"],
        [[r.mode, r.rho, u, f] for r in reps for u, f in r.cdf],
    )
    if timeseries:
        for (mode, rho), runs in grouped.items():
            for stats in runs:
                write_timeseries(out / f"timeseries_{run_name(stats)}.csv", stats)
    return reps


def run_name(stats: RunStats) -> str:
    m = stats.meta
    return f"{m['mode']}_rho{m['rho']}_seed{m['seed']}"


def load_reports(path: Path) -> list[ScenarioReport]:
    return [ScenarioReport(**d) for d in json.loads(Path(path).read_text())]


def flatten(groups: Iterable[list[RunStats]]) -> list[RunStats]:
    return [s for g in groups for s in g]
