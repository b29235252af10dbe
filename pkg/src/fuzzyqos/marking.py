"""
Adaptive EF-marking run on a single fluid link.

A constant-rate test flow shares an egress link with background flows
that arrive as a Poisson process and live for exponential times, so the
offered load ramps up. The egress counters are polled every sample
interval; when the utilization policy holds, the test flow is marked EF
and served ahead of best effort traffic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .monitor import CounterEmulator, InterfaceMonitor, ThresholdTrigger
from .netsim import FluidFlow, fluid_share
from .policy import EF, FlowQosTable, PolicyEngine, PolicyRule, parse_policy

DEFAULT_POLICY = "adaptive-ef: IF (bandwidth_utilization==high) THEN (mark {flow} dscp 0x2e)\n"


@dataclass(frozen=True)
class MarkingConfig:
    capacity: float = 8000.0  # kbit/s
    test_flow: int = 17
    test_rate: float = 1000.0  # kbit/s
    background_rate: float = 0.2  # flow arrivals per second
    background_demand: float = 500.0  # kbit/s per flow
    background_lifetime: float = 120.0  # mean seconds
    duration: float = 300.0
    step: float = 1.0
    sample_interval: float = 10.0
    threshold: float = 80.0  # percent, for the trigger event log
    hysteresis: float = 5.0
    policy_enabled: bool = True
    seed: int = 7


@dataclass
class MarkingResult:
    # rows of (time, background demand, background throughput, test throughput, utilization %, test dscp)
    series: list[list[float]] = field(default_factory=list)
    trigger_time: float | None = None
    marked_time: float | None = None
    actions: list[dict] = field(default_factory=list)

    def test_throughput(self) -> np.ndarray:
        return np.array([row[3] for row in self.series])

    def times(self) -> np.ndarray:
        return np.array([row[0] for row in self.series])


def _background(cfg: MarkingConfig) -> list[tuple[float, float]]:
    rng = np.random.default_rng(cfg.seed)
    out = []
    t = rng.exponential(1.0 / cfg.background_rate)
    while t < cfg.duration:
        out.append((t, t + rng.exponential(cfg.background_lifetime)))
        t += rng.exponential(1.0 / cfg.background_rate)
    return out


def run_marking(cfg: MarkingConfig = MarkingConfig(), rules: list[PolicyRule] | None = None) -> MarkingResult:
    if rules is None:
        rules = parse_policy(DEFAULT_POLICY.format(flow=cfg.test_flow))
    if not cfg.policy_enabled:
        rules = []
    background = _background(cfg)
    counters = CounterEmulator(cfg.capacity * 1000.0)
    monitor = InterfaceMonitor("out")
    trigger = ThresholdTrigger(cfg.threshold, cfg.hysteresis)
    engine = PolicyEngine()
    table = FlowQosTable()
    res = MarkingResult()
    monitor.poll(counters.sample(0.0))

    n_steps = int(round(cfg.duration / cfg.step))
    per_sample = int(round(cfg.sample_interval / cfg.step))
    util = 0.0
    for n in range(n_steps):
        t = n * cfg.step
        flows = [FluidFlow(cfg.test_flow, cfg.test_rate, table[cfg.test_flow] == EF)]
        flows += [
            FluidFlow(1000 + i, cfg.background_demand)
            for i, (start, end) in enumerate(background)
            if start <= t < end
        ]
        rates = fluid_share(cfg.capacity, flows)
        total = sum(rates.values())
        bg_demand = sum(f.demand for f in flows[1:])
        counters.transmit(0.0, total, cfg.step)
        res.series.append(
            [t, bg_demand, total - rates[cfg.test_flow], rates[cfg.test_flow], util, table[cfg.test_flow]]
        )

        if (n + 1) % per_sample == 0:
            ts = t + cfg.step
            _, util = monitor.poll(counters.sample(ts))
            if trigger.update(util) is not None and res.trigger_time is None:
                res.trigger_time = ts
            known = {f.flow_id for f in flows}
            records, table = engine.evaluate(rules, {"utilization": util / 100.0}, table, known, ts)
            for r in records:
                if r.result == "applied":
                    res.actions.append(json.loads(r.to_json()))
                    if res.marked_time is None and cfg.test_flow in r.flows:
                        res.marked_time = ts
    return res
