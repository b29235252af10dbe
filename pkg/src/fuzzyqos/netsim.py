"""
Flow-level discrete-event simulation of multi-class admission control.

Each class has its own Poisson arrival stream with exponential holding
times. Per-class aggregates are sampled at a fixed interval; in FRB mode
the sample drives the fuzzy allocator and the resulting thresholds hold
until the next sample. Runs continue until every admitted flow departs.
"""

from __future__ import annotations

import heapq
import json
import itertools
import logging
from dataclasses import dataclass, field, replace
from enum import IntEnum
from pathlib import Path
from typing import Sequence

import numpy as np

from .admission import AdmissionMode, FlowRequest, LinkState, admit, check, release
from .allocator import (
    AllocationPolicySet,
    FrbSystem,
    build_frb,
    compute_allocations,
    compute_inputs,
)
from .errors import ConfigurationError
from .fuzzy import RuleBase, parse_rule_file
from .metrics import RunStats
from .monitor import EwmaEstimator
from .policy import FlowQosTable, PolicyEngine, PolicyRule, parse_policy

log = logging.getLogger(__name__)

DEFAULT_BITRATES = (32.0, 384.0, 256.0)
DEFAULT_RATES = (0.8, 0.8, 0.8)
DEFAULT_REQUESTS = (5000, 5000, 5000)


@dataclass(frozen=True)
class ClassTraffic:
    rate: float  # arrivals per second
    mean_lifetime: float  # seconds
    bitrate: float  # kbit/s
    requests: int

    def __post_init__(self):
        if not self.rate > 0 or not self.mean_lifetime > 0 or not self.bitrate > 0:
            raise ConfigurationError(f"traffic parameters must be positive: {self}")
        if self.requests < 0:
            raise ConfigurationError("request count must be >= 0")


@dataclass(frozen=True)
class WorkloadSpec:
    classes: tuple[ClassTraffic, ...]

    @classmethod
    def from_rho(
        cls,
        rho: float,
        policy: AllocationPolicySet,
        bitrates: Sequence[float] = DEFAULT_BITRATES,
        rates: Sequence[float] = DEFAULT_RATES,
        requests: Sequence[int] = DEFAULT_REQUESTS,
    ) -> WorkloadSpec:
        out = []
        for j, (bw, lam, n) in enumerate(zip(bitrates, rates, requests), start=1):
            life = lifetime_from_rho(rho, j, policy, bitrates, rates)
            out.append(ClassTraffic(lam, life, bw, n))
        return cls(tuple(out))


def lifetime_from_rho(
    rho: float,
    class_id: int,
    policy: AllocationPolicySet,
    bitrates: Sequence[float] = DEFAULT_BITRATES,
    rates: Sequence[float] = DEFAULT_RATES,
) -> float:
    """Mean holding time giving class load ratio rho = bw*lambda*lifetime / B_j."""
    j = class_id - 1
    if not rho > 0:
        raise ConfigurationError("rho must be > 0")
    denom = bitrates[j] * rates[j]
    if not denom > 0:
        raise ConfigurationError(f"class {class_id}: bitrate and arrival rate must be > 0")
    return rho * policy.base[j] / denom


@dataclass(frozen=True)
class ClassStream:
    arrivals: np.ndarray  # absolute times
    lifetimes: np.ndarray


def generate_workload(spec: WorkloadSpec, seed: int) -> list[ClassStream]:
    """One independent generator per class, spawned from ``seed``."""
    children = np.random.SeedSequence(seed).spawn(len(spec.classes))
    streams = []
    for c, ss in zip(spec.classes, children):
        rng = np.random.default_rng(ss)
        gaps = rng.exponential(1.0 / c.rate, c.requests)
        lifetimes = rng.exponential(c.mean_lifetime, c.requests)
        streams.append(ClassStream(np.cumsum(gaps), lifetimes))
    return streams


class EventKind(IntEnum):
    # tie-break order at equal timestamps
    DEPARTURE = 0
    SAMPLE = 1
    ARRIVAL = 2


class EventQueue:
    """Min-heap ordered by (time, kind, insertion sequence)."""

    def __init__(self):
        self._heap: list = []
        self._seq = itertools.count()

    def push(self, time: float, kind: EventKind, payload=None) -> None:
        heapq.heappush(self._heap, (time, int(kind), next(self._seq), payload))

    def pop(self) -> tuple[float, EventKind, object]:
        time, kind, _, payload = heapq.heappop(self._heap)
        return time, EventKind(kind), payload

    def __len__(self):
        return len(self._heap)


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    rho: float = 0.2
    mode: AdmissionMode = AdmissionMode.FRB_ADAPTIVE
    sample_interval: float = 10.0
    policy: AllocationPolicySet = field(default_factory=AllocationPolicySet.default)
    bitrates: tuple[float, ...] = DEFAULT_BITRATES
    rates: tuple[float, ...] = DEFAULT_RATES
    requests: tuple[int, ...] = DEFAULT_REQUESTS
    rules_path: str | None = None
    policies_path: str | None = None
    ewma_alpha: float | None = None
    # record the decision every mode would take on each arrival's state
    shadow: bool = False
    # recompute aggregates from scratch after every event (slow)
    audit: bool = False
    record_decisions: bool = True

    def __post_init__(self):
        if not self.sample_interval > 0:
            raise ConfigurationError("sample interval must be > 0")
        if not self.rho > 0:
            raise ConfigurationError("rho must be > 0")
        k = self.policy.n_classes
        if not len(self.bitrates) == len(self.rates) == len(self.requests) == k:
            raise ConfigurationError("bitrates, rates and requests must match the class count")

    def workload(self) -> WorkloadSpec:
        return WorkloadSpec.from_rho(self.rho, self.policy, self.bitrates, self.rates, self.requests)

    def with_(self, **kw) -> RunConfig:
        return replace(self, **kw)


def load_rules(path: str | None) -> RuleBase | None:
    if path is None:
        return None
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"rule file not found: {path}")
    return parse_rule_file(p.read_text())


def load_policies(path: str | None) -> list[PolicyRule]:
    if path is None:
        return []
    p = Path(path)
    if not p.is_file():
        raise ConfigurationError(f"policy file not found: {path}")
    return parse_policy(p.read_text())


class _Run:
    """Mutable state of one simulation run."""

    def __init__(self, config: RunConfig, streams: list[ClassStream]):
        self.cfg = config
        self.streams = streams
        self.policy = config.policy
        self.k = config.policy.n_classes
        self.state = LinkState(config.policy.total, self.k)

        self.rules = load_rules(config.rules_path)
        need_frb = config.mode is AdmissionMode.FRB_ADAPTIVE or config.shadow
        self.frb: FrbSystem | None = build_frb(self.policy, self.rules) if need_frb else None
        self.thresholds: tuple[float, ...] | None = None

        self.policies = load_policies(config.policies_path)
        self.engine = PolicyEngine()
        self.qos = FlowQosTable()
        self.ewma = [EwmaEstimator(config.ewma_alpha) for _ in range(self.k)] if config.ewma_alpha else None

        self.generated = [0] * self.k
        self.accepted = [0] * self.k
        self.rejected = [0] * self.k
        self.timeseries: list[list[float]] = []
        self.decisions: list[list] = []
        self.actions: list[dict] = []
        # flow ids are contiguous per class: class j owns [offset_j, offset_j + n_j)
        self.offsets = list(itertools.accumulate([0] + [len(s.arrivals) for s in streams]))[:-1]

    def limits(self, mode: AdmissionMode):
        if mode is AdmissionMode.BASE_POLICY:
            return self.policy.base
        if mode is AdmissionMode.FRB_ADAPTIVE:
            return self.thresholds
        return None

    def on_sample(self, t: float) -> None:
        agg = list(self.state.aggregates)
        total = sum(agg)
        self.timeseries.append([t, *agg, total, total / self.policy.total])
        if self.ewma is not None:
            agg = [e.update(b) for e, b in zip(self.ewma, agg)]
        if self.policies:
            measurements = {"utilization": total / self.policy.total}
            for j, b in enumerate(agg, start=1):
                measurements[f"class{j}_load"] = b / self.policy.total
            records, self.qos = self.engine.evaluate(
                self.policies, measurements, self.qos, set(self.state.active), t
            )
            for r in records:
                if r.shares is not None:
                    if r.shares == self.policy.shares:
                        continue
                    if len(r.shares) != self.k:
                        raise ConfigurationError(f"rule {r.rule}: {len(r.shares)} shares for {self.k} classes")
                    self.policy = AllocationPolicySet(self.policy.total, r.shares)
                    if self.frb is not None:
                        self.frb = build_frb(self.policy, self.rules)
                elif r.result == "unchanged":
                    continue
                self.actions.append(json.loads(r.to_json()))
        if self.frb is not None:
            res = compute_allocations(self.frb, compute_inputs(agg, self.policy))
            self.thresholds = res.thresholds

    def on_arrival(self, j: int, i: int, t: float) -> FlowRequest:
        s = self.streams[j]
        req = FlowRequest(self.offsets[j] + i, j + 1, self.cfg.bitrates[j], t, float(s.lifetimes[i]))
        self.generated[j] += 1
        row = [req.flow_id, req.class_id, t]
        if self.cfg.shadow:
            shadow = [int(check(self.state, req, m, self.limits(m)).accepted) for m in AdmissionMode]
        d = admit(self.state, req, self.cfg.mode, self.limits(self.cfg.mode))
        if d.accepted:
            self.accepted[j] += 1
        else:
            self.rejected[j] += 1
        row.append(int(d.accepted))
        if self.cfg.shadow:
            row.extend(shadow)
        if self.cfg.record_decisions:
            self.decisions.append(row)
        return req

    def audit(self) -> None:
        if self.state.recompute() != self.state.aggregates:
            raise AssertionError("aggregate drift")
        if self.state.total > self.state.capacity:
            raise AssertionError("capacity exceeded")

    def run(self) -> RunStats:
        q = EventQueue()
        for j, s in enumerate(self.streams):
            if len(s.arrivals):
                q.push(float(s.arrivals[0]), EventKind.ARRIVAL, (j, 0))
        q.push(0.0, EventKind.SAMPLE)
        pending_arrivals = sum(len(s.arrivals) for s in self.streams)
        interval = self.cfg.sample_interval
        n_samples = 0
        while len(q):
            t, kind, payload = q.pop()
            if kind is EventKind.SAMPLE:
                self.on_sample(t)
                n_samples += 1
                if pending_arrivals or self.state.active:
                    q.push(n_samples * interval, EventKind.SAMPLE)
            elif kind is EventKind.ARRIVAL:
                j, i = payload
                pending_arrivals -= 1
                req = self.on_arrival(j, i, t)
                if req.flow_id in self.state.active:
                    q.push(t + req.lifetime, EventKind.DEPARTURE, req.flow_id)
                if i + 1 < len(self.streams[j].arrivals):
                    q.push(float(self.streams[j].arrivals[i + 1]), EventKind.ARRIVAL, (j, i + 1))
            else:
                release(self.state, payload)
            if self.cfg.audit:
                self.audit()

        meta = {
            "seed": self.cfg.seed,
            "rho": self.cfg.rho,
            "mode": self.cfg.mode.value,
            "sample_interval": interval,
            "end_time": t if n_samples else 0.0,
        }
        if self.cfg.shadow:
            meta["shadow_modes"] = [m.value for m in AdmissionMode]
        return RunStats(
            self.generated, self.accepted, self.rejected, self.timeseries, self.decisions, self.actions, meta
        )


def run_scenario(config: RunConfig, streams: list[ClassStream] | None = None) -> RunStats:
    """Simulate one run. Configuration problems raise before the first event."""
    if streams is None:
        streams = generate_workload(config.workload(), config.seed)
    return _Run(config, streams).run()


# --- fluid link ------------------------------------------------------------


@dataclass(frozen=True)
class FluidFlow:
    flow_id: int
    demand: float  # kbit/s
    ef: bool = False


def fluid_share(capacity: float, flows: Sequence[FluidFlow]) -> dict[int, float]:
    """Strict-priority fluid sharing.

    EF flows are served first in flow-id order, each up to its demand; best
    effort flows split what is left in proportion to demand, never above it.
    """
    rates: dict[int, float] = {}
    residual = capacity
    for f in sorted((f for f in flows if f.ef), key=lambda f: f.flow_id):
        rates[f.flow_id] = min(f.demand, residual)
        residual -= rates[f.flow_id]
    best_effort = [f for f in flows if not f.ef]
    demand = sum(f.demand for f in best_effort)
    scale = min(1.0, residual / demand) if demand > 0 else 0.0
    for f in best_effort:
        rates[f.flow_id] = f.demand * scale
    return rates
