"""
Run statistics, scenario metrics, and analytical blocking oracles.

Two independent routes give exact multi-rate loss-system blocking: brute
enumeration of the product-form state space (supports per-class caps) and
the Kaufman-Roberts occupancy recursion (total capacity only).
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InvalidParameterError, OversizeError, UndefinedMetricError


@dataclass
class RunStats:
    generated: list[int]
    accepted: list[int]
    rejected: list[int]
    # rows of (time, b_1..b_k, total, utilization)
    timeseries: list[list[float]] = field(default_factory=list)
    # rows of (flow_id, class_id, arrival_time, accepted)
    decisions: list[list] = field(default_factory=list)
    actions: list[dict] = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        for g, a, r in zip(self.generated, self.accepted, self.rejected):
            if g != a + r:
                raise InvalidParameterError("generated must equal accepted + rejected")

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> RunStats:
        return cls(**json.loads(text))

    def utilization_series(self) -> list[float]:
        return [row[-1] for row in self.timeseries]


def _totals(stats) -> tuple[list[int], list[int], list[int]]:
    if isinstance(stats, RunStats):
        return stats.generated, stats.accepted, stats.rejected
    runs = list(stats)
    k = len(runs[0].generated)
    return (
        [sum(r.generated[j] for r in runs) for j in range(k)],
        [sum(r.accepted[j] for r in runs) for j in range(k)],
        [sum(r.rejected[j] for r in runs) for j in range(k)],
    )


def availability(stats: RunStats | Iterable[RunStats]) -> float:
    """Fraction of all requests admitted, pooled over classes (and runs)."""
    gen, acc, _ = _totals(stats)
    if sum(gen) == 0:
        raise UndefinedMetricError("availability undefined with zero requests")
    return sum(acc) / sum(gen)


def blocking_per_class(stats: RunStats | Iterable[RunStats]) -> list[float]:
    gen, _, rej = _totals(stats)
    if any(g == 0 for g in gen):
        raise UndefinedMetricError("blocking undefined for a class with zero requests")
    return [r / g for r, g in zip(rej, gen)]


def utilization_cdf(series: Sequence[float], capacity: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Empirical CDF of utilization fraction: (sorted distinct values, F(value))."""
    if len(series) == 0:
        raise UndefinedMetricError("empty utilization series")
    x = np.sort(np.asarray(series, dtype=float) / capacity)
    vals, counts = np.unique(x, return_counts=True)
    return vals, np.cumsum(counts) / len(x)


def cdf_at(points: tuple[np.ndarray, np.ndarray], x: float) -> float:
    vals, f = points
    i = np.searchsorted(vals, x, side="right")
    return 0.0 if i == 0 else float(f[i - 1])


def _mean_se(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    mean = math.fsum(xs) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2 for x in xs) / (n - 1)
    return mean, math.sqrt(var / n)


@dataclass
class ScenarioReport:
    mode: str
    rho: float
    runs: int
    availability: float
    availability_se: float
    blocking: list[float]
    blocking_se: list[float]
    cdf: list[list[float]]  # (utilization, F)

    @classmethod
    def from_runs(cls, mode: str, rho: float, runs: Sequence[RunStats]) -> ScenarioReport:
        """Aggregate over runs. Means use exact summation so run order does not matter."""
        if not runs:
            raise UndefinedMetricError("no runs to aggregate")
        av = [availability(r) for r in runs]
        bl = [blocking_per_class(r) for r in runs]
        k = len(bl[0])
        a_mean, a_se = _mean_se(av)
        per = [_mean_se([b[j] for b in bl]) for j in range(k)]
        pooled = sorted(u for r in runs for u in r.utilization_series())
        vals, f = utilization_cdf(pooled)
        return cls(
            mode, rho, len(runs), a_mean, a_se, [m for m, _ in per], [s for _, s in per],
            [[float(v), float(p)] for v, p in zip(vals, f)],
        )

    def to_dict(self) -> dict:
        return asdict(self)


# --- oracles ---------------------------------------------------------------


def erlang_b(servers: int, load: float) -> float:
    """Erlang-B blocking via the stable recursion."""
    b = 1.0
    for n in range(1, servers + 1):
        b = load * b / (n + load * b)
    return b


def product_form_oracle(
    capacity: int,
    sizes: Sequence[int],
    loads: Sequence[float],
    caps: Sequence[int] | None = None,
    max_states: int = 5_000_000,
) -> list[float]:
    """Exact per-class blocking by enumerating every admissible state.

    State (n_1..n_k) is admissible when sum n_j*size_j <= capacity and
    n_j*size_j <= cap_j. Its unnormalized weight is prod a_j^n_j / n_j!.
    Class j is blocked in states where one more class-j flow is inadmissible.
    """
    k = len(sizes)
    if len(loads) != k or (caps is not None and len(caps) != k):
        raise InvalidParameterError("sizes, loads and caps must have equal length")
    if capacity <= 0 or any(s <= 0 for s in sizes) or any(a < 0 for a in loads):
        raise InvalidParameterError("capacity and sizes must be positive, loads non-negative")
    caps = [capacity] * k if caps is None else [min(c, capacity) for c in caps]
    if any(c < 0 for c in caps):
        raise InvalidParameterError("caps must be non-negative")
    limits = [c // s for c, s in zip(caps, sizes)]
    n_states = math.prod(n + 1 for n in limits)
    if n_states > max_states:
        raise OversizeError(f"state space bound {n_states} exceeds {max_states}")

    axes = np.meshgrid(*[np.arange(n + 1) for n in limits], indexing="ij")
    used = sum(ax * s for ax, s in zip(axes, sizes))
    feasible = used <= capacity
    logw = np.zeros(used.shape)
    for ax, a in zip(axes, loads):
        lgam = np.array([math.lgamma(n + 1) for n in range(ax.max() + 1)])
        if a == 0:
            term = np.where(ax == 0, 0.0, -np.inf)
        else:
            term = ax * math.log(a) - lgam[ax]
        logw = logw + term
    logw = np.where(feasible, logw, -np.inf)
    w = np.exp(logw - logw.max())
    total = w.sum()
    out = []
    for ax, s, c in zip(axes, sizes, caps):
        blocked = feasible & ((used + s > capacity) | ((ax + 1) * s > c))
        out.append(float(w[blocked].sum() / total))
    return out


def kaufman_roberts(capacity: int, sizes: Sequence[int], loads: Sequence[float]) -> list[float]:
    """Per-class blocking from the occupancy recursion c*q(c) = sum_j a_j s_j q(c - s_j)."""
    q = [0.0] * (capacity + 1)
    q[0] = 1.0
    for c in range(1, capacity + 1):
        q[c] = math.fsum(a * s * q[c - s] for a, s in zip(loads, sizes) if s <= c) / c
        if q[c] > 1e250:
            # rescale to stay finite; blocking only depends on ratios
            q = [v / q[c] for v in q]
    total = math.fsum(q)
    return [math.fsum(q[max(0, capacity - s + 1):]) / total for s in sizes]


def oracle_inputs(
    lifetimes: Sequence[float],
    rates: Sequence[float] = (0.8, 0.8, 0.8),
    bitrates: Sequence[int] = (32, 384, 256),
    total: float = 6400,
    base: Sequence[float] | None = None,
) -> dict:
    """Oracle arguments in bandwidth units of gcd(bitrates)."""
    unit = math.gcd(*[int(b) for b in bitrates])
    if any(b != int(b) for b in bitrates) or total % unit:
        raise InvalidParameterError("bitrates and capacity must be integer multiples of a common unit")
    out = {
        "capacity": int(total // unit),
        "sizes": [int(b) // unit for b in bitrates],
        "loads": [lam * life for lam, life in zip(rates, lifetimes)],
    }
    if base is not None:
        out["caps"] = [int(round(b)) // unit for b in base]
    return out


def enumerate_states(capacity: int, sizes: Sequence[int], caps: Sequence[int] | None = None):
    """Plain generator over admissible states; small cases only."""
    caps = caps or [capacity] * len(sizes)
    ranges = [range(c // s + 1) for c, s in zip(caps, sizes)]
    for n in itertools.product(*ranges):
        if sum(x * s for x, s in zip(n, sizes)) <= capacity:
            yield n
