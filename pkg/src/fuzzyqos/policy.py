"""
High-level QoS policies and the per-flow DSCP look-up table.

Policy files hold one rule per line::

    [disabled] [<name>:] IF (flow==17) THEN (mark dscp 0x2e)
    [disabled] [<name>:] IF (bandwidth_utilization==high) THEN (mark 17 dscp 0x2e)
    [disabled] [<name>:] IF (bandwidth_utilization==high) THEN (allocate 0.3,0.4,0.3)

Flow identifiers are integers or inclusive ranges ``lo-hi``. Linguistic
states are resolved through a state map::

    state bandwidth_utilization high := utilization >= 0.80
"""

from __future__ import annotations

import json
import logging
import operator
import re
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence, Union

from .errors import ConfigurationError, ParseError

log = logging.getLogger(__name__)

BEST_EFFORT = 0x00
EF = 0x2E

_OPS = {
    ">=": operator.ge,
    ">": operator.gt,
    "<=": operator.le,
    "<": operator.lt,
    "==": operator.eq,
    "!=": operator.ne,
}


@dataclass(frozen=True)
class FlowId:
    """A single flow id or an inclusive contiguous range."""

    lo: int
    hi: int

    def __post_init__(self):
        if self.hi < self.lo:
            raise ConfigurationError(f"empty flow range {self.lo}-{self.hi}")

    @classmethod
    def parse(cls, text: str) -> FlowId:
        text = text.strip()
        if m := re.fullmatch(r"(\d+)\s*-\s*(\d+)", text):
            return cls(int(m.group(1)), int(m.group(2)))
        if text.isdigit():
            return cls(int(text), int(text))
        raise ValueError(f"bad flow identifier {text!r}")

    def __iter__(self):
        return iter(range(self.lo, self.hi + 1))

    def __contains__(self, flow: int) -> bool:
        return self.lo <= flow <= self.hi

    def __str__(self):
        return str(self.lo) if self.lo == self.hi else f"{self.lo}-{self.hi}"


@dataclass(frozen=True)
class FlowMatch:
    flow: FlowId


@dataclass(frozen=True)
class TemporalEvent:
    event: str
    state: str


@dataclass(frozen=True)
class MarkDscp:
    dscp: int
    flow: FlowId | None = None  # None: the flow named by a FlowMatch condition

    def __post_init__(self):
        if not 0 <= self.dscp <= 63:
            raise ConfigurationError(f"dscp {self.dscp} outside [0, 63]")


@dataclass(frozen=True)
class SetAllocation:
    shares: tuple[float, ...]


Condition = Union[FlowMatch, TemporalEvent]
Action = Union[MarkDscp, SetAllocation]


@dataclass(frozen=True)
class PolicyRule:
    name: str
    condition: Condition
    action: Action
    enabled: bool = True

    @property
    def is_runtime(self) -> bool:
        return isinstance(self.condition, TemporalEvent)

    def target(self) -> FlowId | None:
        if isinstance(self.action, MarkDscp):
            if self.action.flow is not None:
                return self.action.flow
            if isinstance(self.condition, FlowMatch):
                return self.condition.flow
        return None


@dataclass(frozen=True)
class Predicate:
    metric: str
    op: str
    value: float

    def holds(self, measurements: Mapping[str, float]) -> bool:
        try:
            x = measurements[self.metric]
        except KeyError:
            raise ConfigurationError(f"measurement {self.metric!r} not provided") from None
        return _OPS[self.op](x, self.value)

    def __str__(self):
        return f"{self.metric} {self.op} {self.value!r}"


class LinguisticStateMap(dict):
    """(event, state) -> Predicate."""

    @classmethod
    def parse(cls, text: str) -> LinguisticStateMap:
        out = cls()
        pat = re.compile(r"^state\s+(\w+)\s+(\w+)\s*:=\s*(\w+)\s*(>=|<=|==|!=|>|<)\s*(\S+)$")
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            m = pat.match(line)
            if not m:
                raise ParseError(f"cannot parse state definition {line!r}", lineno)
            try:
                value = float(m.group(5))
            except ValueError:
                raise ParseError(f"bad threshold {m.group(5)!r}", lineno) from None
            out[(m.group(1), m.group(2))] = Predicate(m.group(3), m.group(4), value)
        return out

    def serialize(self) -> str:
        return "".join(f"state {ev} {st} := {p}\n" for (ev, st), p in self.items())

    @classmethod
    def default(cls) -> LinguisticStateMap:
        return cls({("bandwidth_utilization", "high"): Predicate("utilization", ">=", 0.80)})


# --- parsing ---------------------------------------------------------------

_RULE_RE = re.compile(
    r"^(?:(?P<disabled>disabled)\s+)?(?:(?P<name>[\w.\-]+)\s*:\s*)?"
    r"IF\s*(?P<cond>\(.*?\)(?:\s*==\s*[\w.\-]+)?)\s*THEN\s*\((?P<action>.*)\)\s*\.?$",
    re.IGNORECASE,
)
_COND_INNER = re.compile(r"^\(\s*(\w+)\s*==\s*([\w.\-]+)\s*\)$")
_COND_OUTER = re.compile(r"^\(\s*(\w+)\s*\)\s*==\s*([\w.\-]+)$")
_MARK_RE = re.compile(
    r"^mark(?:\s+(?:flow\s+)?(?P<flow>\d+(?:\s*-\s*\d+)?))?(?:\s+with)?\s+dscp\s*=?\s*(?P<dscp>\S+)$",
    re.IGNORECASE,
)
_ALLOC_RE = re.compile(r"^allocate\s+(?P<shares>[\d.,\s]+)$", re.IGNORECASE)


def _parse_dscp(tok: str, lineno: int) -> int:
    try:
        v = int(tok, 16) if tok.lower().startswith("0x") else int(tok)
    except ValueError:
        raise ParseError(f"malformed dscp {tok!r}", lineno) from None
    if not 0 <= v <= 63:
        raise ParseError(f"dscp {tok} outside [0, 63]", lineno)
    return v


def parse_policy(text: str, states: LinguisticStateMap | None = None) -> list[PolicyRule]:
    """Parse a policy file; rule order is evaluation priority."""
    states = LinguisticStateMap.default() if states is None else states
    rules: list[PolicyRule] = []
    names: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _RULE_RE.match(line)
        if not m:
            raise ParseError(f"cannot parse policy {line!r}", lineno)
        cond_text = m.group("cond")
        cm = _COND_INNER.match(cond_text) or _COND_OUTER.match(cond_text)
        if not cm:
            raise ParseError(f"malformed condition {cond_text!r}", lineno)
        lhs, rhs = cm.group(1), cm.group(2)
        if lhs.lower() == "flow":
            try:
                cond: Condition = FlowMatch(FlowId.parse(rhs))
            except (ValueError, ConfigurationError) as e:
                raise ParseError(str(e), lineno) from None
        else:
            if (lhs, rhs) not in states:
                raise ParseError(f"unknown state {rhs!r} for event {lhs!r}", lineno)
            cond = TemporalEvent(lhs, rhs)

        act_text = m.group("action").strip()
        if am := _MARK_RE.match(act_text):
            flow = FlowId.parse(am.group("flow")) if am.group("flow") else None
            action: Action = MarkDscp(_parse_dscp(am.group("dscp"), lineno), flow)
            if flow is None and not isinstance(cond, FlowMatch):
                raise ParseError("runtime mark action needs an explicit flow id", lineno)
        elif am := _ALLOC_RE.match(act_text):
            try:
                shares = tuple(float(s) for s in am.group("shares").split(",") if s.strip())
            except ValueError:
                raise ParseError(f"bad shares {am.group('shares')!r}", lineno) from None
            if not shares or any(not 0 < s <= 1 for s in shares):
                raise ParseError("allocation shares must lie in (0, 1]", lineno)
            action = SetAllocation(shares)
        else:
            raise ParseError(f"unknown action {act_text!r}", lineno)

        name = m.group("name") or f"rule{len(rules) + 1}"
        if name in names:
            raise ParseError(f"duplicate rule name {name!r}", lineno)
        names.add(name)
        rules.append(PolicyRule(name, cond, action, enabled=m.group("disabled") is None))
    return rules


def serialize_policy(rules: Iterable[PolicyRule]) -> str:
    lines = []
    for r in rules:
        if isinstance(r.condition, FlowMatch):
            cond = f"(flow=={r.condition.flow})"
        else:
            cond = f"({r.condition.event}=={r.condition.state})"
        if isinstance(r.action, MarkDscp):
            who = f" {r.action.flow}" if r.action.flow is not None else ""
            act = f"mark{who} dscp 0x{r.action.dscp:02x}"
        else:
            act = "allocate " + ",".join(repr(s) for s in r.action.shares)
        prefix = "" if r.enabled else "disabled "
        lines.append(f"{prefix}{r.name}: IF {cond} THEN ({act})")
    return "\n".join(lines) + "\n"


# --- look-up table and evaluation -----------------------------------------


class FlowQosTable:
    """flow id -> DSCP; absent flows are best effort."""

    def __init__(self, entries: Mapping[int, int] | None = None):
        self._entries: dict[int, int] = dict(entries or {})

    def __getitem__(self, flow: int) -> int:
        return self._entries.get(flow, BEST_EFFORT)

    def __contains__(self, flow: int) -> bool:
        return flow in self._entries

    def __eq__(self, other):
        return isinstance(other, FlowQosTable) and self._entries == other._entries

    def __repr__(self):
        return f"FlowQosTable({self._entries!r})"

    def items(self):
        return sorted(self._entries.items())

    def with_entry(self, flow: int, dscp: int) -> FlowQosTable:
        t = FlowQosTable(self._entries)
        t._entries[flow] = dscp
        return t


@dataclass(frozen=True)
class ActionRecord:
    timestamp: float
    rule: str
    action: str
    result: str  # applied | unchanged | skipped
    flows: tuple[int, ...] = ()
    dscp: int | None = None
    shares: tuple[float, ...] | None = None

    def to_json(self) -> str:
        d = {"timestamp": self.timestamp, "rule": self.rule, "action": self.action, "result": self.result}
        if self.flows:
            d["flows"] = list(self.flows)
        if self.dscp is not None:
            d["dscp"] = self.dscp
        if self.shares is not None:
            d["shares"] = list(self.shares)
        return json.dumps(d, sort_keys=True)


def _describe(action: Action) -> str:
    if isinstance(action, MarkDscp):
        who = f" {action.flow}" if action.flow is not None else ""
        return f"mark{who} dscp 0x{action.dscp:02x}"
    return "allocate " + ",".join(repr(s) for s in action.shares)


@dataclass
class PolicyEngine:
    """Holds the state map and transport status used during evaluation."""

    states: LinguisticStateMap = field(default_factory=LinguisticStateMap.default)
    transport_configured: bool = True

    def evaluate(
        self,
        rules: Sequence[PolicyRule],
        measurements: Mapping[str, float],
        table: FlowQosTable,
        known_flows: set[int] | None = None,
        timestamp: float = 0.0,
    ) -> tuple[list[ActionRecord], FlowQosTable]:
        """Fire every enabled rule whose condition holds.

        ``known_flows`` restricts which flows exist; ``None`` means every
        named flow exists. Marks pointing at unknown flows are logged and
        skipped.
        """
        records: list[ActionRecord] = []
        for rule in rules:
            if not rule.enabled:
                continue
            if rule.is_runtime:
                if not self.transport_configured:
                    raise ConfigurationError(
                        f"rule {rule.name}: runtime policy evaluated before initial transport configuration"
                    )
                pred = self.states.get((rule.condition.event, rule.condition.state))
                if pred is None:
                    raise ConfigurationError(f"rule {rule.name}: unresolved state {rule.condition.state!r}")
                if not pred.holds(measurements):
                    continue
            elif known_flows is not None and not any(f in known_flows for f in rule.condition.flow):
                continue

            desc = _describe(rule.action)
            if isinstance(rule.action, SetAllocation):
                records.append(ActionRecord(timestamp, rule.name, desc, "applied", shares=rule.action.shares))
                continue
            target = rule.target()
            flows = [f for f in target if known_flows is None or f in known_flows]
            if not flows:
                log.warning("rule %s: action references unknown flow %s; skipped", rule.name, target)
                records.append(ActionRecord(timestamp, rule.name, desc, "skipped", (), rule.action.dscp))
                continue
            changed = [f for f in flows if table[f] != rule.action.dscp or f not in table]
            for f in changed:
                table = table.with_entry(f, rule.action.dscp)
            result = "applied" if changed else "unchanged"
            records.append(ActionRecord(timestamp, rule.name, desc, result, tuple(changed or flows), rule.action.dscp))
        return records, table


def evaluate(
    rules: Sequence[PolicyRule],
    measurements: Mapping[str, float],
    table: FlowQosTable,
    states: LinguisticStateMap | None = None,
    known_flows: set[int] | None = None,
    timestamp: float = 0.0,
) -> tuple[list[ActionRecord], FlowQosTable]:
    engine = PolicyEngine(states if states is not None else LinguisticStateMap.default())
    return engine.evaluate(rules, measurements, table, known_flows, timestamp)


def replay(records: Iterable[ActionRecord], table: FlowQosTable | None = None) -> FlowQosTable:
    """Rebuild a table from an action log."""
    table = table or FlowQosTable()
    for r in records:
        if r.result == "applied" and r.dscp is not None:
            for f in r.flows:
                table = table.with_entry(f, r.dscp)
    return table
