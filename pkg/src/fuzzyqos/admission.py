"""Per-request admission decisions over a shared link."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .errors import ConfigurationError, InvalidRequestError, NotFoundError


class AdmissionMode(Enum):
    CLASS_AGNOSTIC = "class-agnostic"
    BASE_POLICY = "base-policy"
    FRB_ADAPTIVE = "frb"

    @classmethod
    def parse(cls, text: str) -> AdmissionMode:
        key = text.strip().lower().replace("_", "-")
        aliases = {
            "class-agnostic": cls.CLASS_AGNOSTIC,
            "classagnostic": cls.CLASS_AGNOSTIC,
            "agnostic": cls.CLASS_AGNOSTIC,
            "base-policy": cls.BASE_POLICY,
            "basepolicy": cls.BASE_POLICY,
            "base": cls.BASE_POLICY,
            "frb": cls.FRB_ADAPTIVE,
            "frb-adaptive": cls.FRB_ADAPTIVE,
            "frbadaptive": cls.FRB_ADAPTIVE,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ConfigurationError(f"unknown admission mode {text!r}") from None


@dataclass(frozen=True)
class FlowRequest:
    flow_id: int
    class_id: int  # 1-based
    bitrate: float  # kbit/s
    arrival: float = 0.0
    lifetime: float = 1.0

    def __post_init__(self):
        if not self.bitrate > 0:
            raise InvalidRequestError(f"flow {self.flow_id}: bitrate must be > 0")
        if not self.lifetime > 0:
            raise InvalidRequestError(f"flow {self.flow_id}: lifetime must be > 0")
        if self.class_id < 1:
            raise InvalidRequestError(f"flow {self.flow_id}: class ids start at 1")


@dataclass
class LinkState:
    capacity: float
    n_classes: int = 3
    active: dict[int, FlowRequest] = field(default_factory=dict)
    aggregates: list[float] = field(default_factory=list)
    counts: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.aggregates:
            self.aggregates = [0.0] * self.n_classes
        if not self.counts:
            self.counts = [0] * self.n_classes

    @property
    def total(self) -> float:
        return sum(self.aggregates)

    def recompute(self) -> list[float]:
        """Aggregates rebuilt from the active set, for drift checks."""
        agg = [0.0] * self.n_classes
        for f in self.active.values():
            agg[f.class_id - 1] += f.bitrate
        return agg

    def snapshot(self) -> tuple:
        return (self.capacity, tuple(sorted(self.active)), tuple(self.aggregates))


@dataclass(frozen=True)
class Decision:
    accepted: bool
    reason: str = ""

    def __bool__(self):
        return self.accepted


ACCEPT = Decision(True)


def check(
    state: LinkState,
    req: FlowRequest,
    mode: AdmissionMode,
    limits: Sequence[float] | None = None,
) -> Decision:
    """Decide without mutating ``state``.

    ``limits`` are the per-class limits in kbit/s: base allocations B_j for
    BASE_POLICY, effective thresholds B_th^j for FRB_ADAPTIVE. Every mode
    also enforces the link capacity.
    """
    if req.class_id > state.n_classes:
        raise InvalidRequestError(f"flow {req.flow_id}: class {req.class_id} not configured")
    if mode is not AdmissionMode.CLASS_AGNOSTIC and limits is None:
        raise ConfigurationError(f"{mode.value} admission needs per-class limits")
    if state.total + req.bitrate > state.capacity:
        return Decision(False, "capacity")
    if mode is AdmissionMode.CLASS_AGNOSTIC:
        return ACCEPT
    j = req.class_id - 1
    if state.aggregates[j] + req.bitrate > limits[j]:
        return Decision(False, "class-limit")
    return ACCEPT


def admit(
    state: LinkState,
    req: FlowRequest,
    mode: AdmissionMode,
    limits: Sequence[float] | None = None,
) -> Decision:
    """Decide and, on acceptance, add the flow to ``state``."""
    if req.flow_id in state.active:
        raise InvalidRequestError(f"duplicate flow id {req.flow_id}")
    d = check(state, req, mode, limits)
    if d.accepted:
        state.active[req.flow_id] = req
        state.aggregates[req.class_id - 1] += req.bitrate
        state.counts[req.class_id - 1] += 1
    return d


def release(state: LinkState, flow_id: int) -> LinkState:
    try:
        req = state.active.pop(flow_id)
    except KeyError:
        raise NotFoundError(f"flow {flow_id} is not active") from None
    j = req.class_id - 1
    state.counts[j] -= 1
    if state.counts[j] == 0:
        # exact reset: non-integer bitrates can leave rounding dust
        state.aggregates[j] = 0.0
    else:
        state.aggregates[j] -= req.bitrate
    return state
