"""
Counter-based interface bandwidth and utilization.

Interface octet counters are 32-bit and wrap; a measurement needs two
samples, and at most one wrap per interval is detectable. OIDs, for
reference: ifInOctets 1.3.6.1.2.1.2.2.1.10, ifOutOctets
1.3.6.1.2.1.2.2.1.16, ifSpeed 1.3.6.1.2.1.2.2.1.5.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Iterator

from .errors import ConfigurationError, InvalidParameterError, InvalidSampleError

COUNTER_MODULUS = 2**32


@dataclass(frozen=True)
class InterfaceCounters:
    in_octets: int
    out_octets: int
    if_speed: float  # bits/s

    def __post_init__(self):
        object.__setattr__(self, "in_octets", int(self.in_octets) % COUNTER_MODULUS)
        object.__setattr__(self, "out_octets", int(self.out_octets) % COUNTER_MODULUS)

    def octets(self, direction: str) -> int:
        if direction == "in":
            return self.in_octets
        if direction == "out":
            return self.out_octets
        raise InvalidParameterError(f"direction must be 'in' or 'out', got {direction!r}")

    def advance(self, in_octets: int = 0, out_octets: int = 0) -> InterfaceCounters:
        return replace(self, in_octets=self.in_octets + in_octets, out_octets=self.out_octets + out_octets)


@dataclass(frozen=True)
class Sample:
    timestamp: float
    counters: InterfaceCounters


def octet_delta(prev: Sample, curr: Sample, direction: str = "out") -> int:
    return (curr.counters.octets(direction) - prev.counters.octets(direction)) % COUNTER_MODULUS


def bandwidth(prev: Sample, curr: Sample, direction: str = "out") -> float:
    """Bits per second between two samples."""
    dt = curr.timestamp - prev.timestamp
    if not dt > 0:
        raise InvalidSampleError(f"sample interval must be > 0, got {dt}")
    return octet_delta(prev, curr, direction) * 8 / dt


def utilization(prev: Sample, curr: Sample, direction: str = "out") -> float:
    """Percent of ifSpeed used between two samples, clamped to [0, 100]."""
    speed = curr.counters.if_speed
    if not speed > 0:
        raise ConfigurationError("ifSpeed must be > 0")
    return min(100.0, max(0.0, bandwidth(prev, curr, direction) * 100 / speed))


class EwmaEstimator:
    """v' = alpha*x + (1 - alpha)*v, seeded by the first observation."""

    def __init__(self, alpha: float = 0.3):
        if not 0 < alpha <= 1:
            raise InvalidParameterError(f"alpha must be in (0, 1], got {alpha}")
        self.alpha = alpha
        self.value: float | None = None

    def update(self, x: float) -> float:
        if self.value is None:
            self.value = x
        else:
            self.value = self.alpha * x + (1 - self.alpha) * self.value
        return self.value


@dataclass(frozen=True)
class TriggerEvent:
    value: float
    threshold: float


class ThresholdTrigger:
    """Fires once on crossing above ``threshold``; re-arms below threshold - hysteresis."""

    def __init__(self, threshold: float = 80.0, hysteresis: float = 5.0):
        if not 0 < threshold <= 100:
            raise InvalidParameterError("threshold must be in (0, 100]")
        self.threshold = threshold
        self.hysteresis = hysteresis
        self.armed = True

    def update(self, value: float) -> TriggerEvent | None:
        if self.armed and value > self.threshold:
            self.armed = False
            return TriggerEvent(value, self.threshold)
        if not self.armed and value < self.threshold - self.hysteresis:
            self.armed = True
        return None


def threshold_trigger(series: Iterable[float], threshold: float = 80.0, hysteresis: float = 5.0) -> list[int]:
    """Indices in ``series`` where the trigger fires."""
    trig = ThresholdTrigger(threshold, hysteresis)
    return [i for i, v in enumerate(series) if trig.update(v) is not None]


class InterfaceMonitor:
    """Polls one interface; yields bandwidth/utilization from the second sample on."""

    def __init__(self, direction: str = "out", alpha: float | None = None):
        self.direction = direction
        self.last: Sample | None = None
        self.ewma = EwmaEstimator(alpha) if alpha is not None else None

    def poll(self, sample: Sample) -> tuple[float, float] | None:
        """(bits/s, utilization %) or None on the first poll."""
        prev, self.last = self.last, sample
        if prev is None:
            return None
        if not sample.timestamp > prev.timestamp:
            self.last = prev
            raise InvalidSampleError("timestamps must be strictly increasing")
        bw = bandwidth(prev, sample, self.direction)
        util = utilization(prev, sample, self.direction)
        if self.ewma is not None:
            util = self.ewma.update(util)
        return bw, util


class CounterEmulator:
    """Counters driven by a fluid throughput (kbit/s); keeps fractional octets."""

    def __init__(self, if_speed: float, start_in: int = 0, start_out: int = 0):
        self.counters = InterfaceCounters(start_in, start_out, if_speed)
        self._carry = [0.0, 0.0]

    def transmit(self, kbps_in: float, kbps_out: float, seconds: float) -> None:
        octs = []
        for k, rate in enumerate((kbps_in, kbps_out)):
            exact = rate * 1000.0 * seconds / 8.0 + self._carry[k]
            whole = math.floor(exact)
            self._carry[k] = exact - whole
            octs.append(whole)
        self.counters = self.counters.advance(*octs)

    def sample(self, timestamp: float) -> Sample:
        return Sample(timestamp, self.counters)


def read_counter_log(path: str | Path, if_speed: float) -> Iterator[Sample]:
    """Replay a CSV counter log with columns timestamp,in_octets,out_octets."""
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            yield Sample(
                float(row["timestamp"]),
                InterfaceCounters(int(row["in_octets"]), int(row["out_octets"]), if_speed),
            )
