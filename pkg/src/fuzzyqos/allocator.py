"""
Fuzzy-rule-based per-class bandwidth allocation.

Class loads normalized by the total bandwidth drive a three-input,
three-output Mamdani system. Its outputs, scaled by the total bandwidth,
raise the per-class admission thresholds above the base policy shares
when the other classes leave headroom.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources
from typing import Sequence

from .errors import ConfigurationError, InvalidMeasurementError
from .fuzzy import (
    DEFAULT_RESOLUTION,
    FuzzyRule,
    GaussianMF,
    LinguisticVariable,
    RuleBase,
    infer,
    parse_rule_file,
)

LOAD_LABELS = ("LL", "ML", "HL")
ALLOCATION_LABELS = ("LA", "MA", "HA")

# input set shapes in units of the class share B_j/B_T: (mean, sigma)
INPUT_SHAPES = {"LL": (0.0, 0.17), "ML": (0.5, 0.13), "HL": (1.0, 0.17)}
OUTPUT_SETS = {"LA": (0.0, 0.17), "MA": (0.5, 0.13), "HA": (1.0, 0.17)}

DEFAULT_RULE_FILE = "default_rules.frb"


@dataclass(frozen=True)
class AllocationPolicySet:
    """Total bandwidth (kbit/s) and the per-class base shares B_j/B_T."""

    total: float
    shares: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "shares", tuple(float(s) for s in self.shares))
        if not self.total > 0:
            raise ConfigurationError("total bandwidth must be > 0")
        if len(self.shares) < 2:
            raise ConfigurationError("need at least two classes")
        for j, s in enumerate(self.shares, start=1):
            if not 0 < s <= 1:
                raise ConfigurationError(f"class {j} share {s} outside (0, 1]")

    @property
    def base(self) -> tuple[float, ...]:
        """Per-class base allocations B_j in kbit/s."""
        return tuple(s * self.total for s in self.shares)

    @property
    def n_classes(self) -> int:
        return len(self.shares)

    @classmethod
    def default(cls) -> AllocationPolicySet:
        return cls(6400.0, (0.3, 0.4, 0.3))


@dataclass(frozen=True)
class FrbSystem:
    policy: AllocationPolicySet
    rule_base: RuleBase


@dataclass(frozen=True)
class AllocationResult:
    fuzzy: tuple[float, ...]  # B_FLS^j, kbit/s
    thresholds: tuple[float, ...]  # B_th^j, kbit/s


def _consequent(score: int, k: int) -> str:
    top = 2 * (k - 1)
    if 2 * score <= k - 1:
        return "HA"
    if score >= top:
        return "LA"
    return "MA"


def default_rule_table(n_classes: int = 3) -> RuleBase:
    """Spare-capacity rule table over every {LL, ML, HL} combination.

    Each class's allocation depends on how loaded the *other* classes are:
    score LL=0, ML=1, HL=2 summed over the others; a low score grants HA,
    the maximum grants LA, anything between MA. Input universes here are
    in share units and get rescaled by :func:`build_frb`.
    """
    if n_classes < 2:
        raise ConfigurationError("need at least two classes")
    score = {"LL": 0, "ML": 1, "HL": 2}
    inputs = tuple(
        LinguisticVariable(
            f"Class{j + 1}Load", 0.0, 1.0, {lab: GaussianMF(*INPUT_SHAPES[lab]) for lab in LOAD_LABELS}
        )
        for j in range(n_classes)
    )
    outputs = tuple(
        LinguisticVariable(f"Class{j + 1}Res", 0.0, 1.0, {lab: GaussianMF(*OUTPUT_SETS[lab]) for lab in ALLOCATION_LABELS})
        for j in range(n_classes)
    )
    rules = []
    for z, combo in enumerate(itertools.product(LOAD_LABELS, repeat=n_classes), start=1):
        cons = []
        for j in range(n_classes):
            s = sum(score[lab] for i, lab in enumerate(combo) if i != j)
            cons.append((j, _consequent(s, n_classes)))
        rules.append(FuzzyRule(z, tuple(enumerate(combo)), tuple(cons)))
    return RuleBase(inputs, outputs, tuple(rules), DEFAULT_RESOLUTION)


def load_default_rules() -> RuleBase:
    """The bundled default rule file (same table as :func:`default_rule_table`)."""
    text = resources.files("fuzzyqos.data").joinpath(DEFAULT_RULE_FILE).read_text()
    return parse_rule_file(text)


def build_frb(policy: AllocationPolicySet, rules: RuleBase | None = None) -> FrbSystem:
    """Scale the rule base's input sets by each class share.

    The rule base's input variables are expressed in share units (universe
    [0, 1], HL centred at 1); class j's variable becomes universe
    [0, B_j/B_T] with every mean and sigma multiplied by B_j/B_T. Output
    variables are used unchanged.
    """
    rules = rules if rules is not None else load_default_rules()
    if rules.q != policy.n_classes or len(rules.outputs) != policy.n_classes:
        raise ConfigurationError(
            f"rule base has {rules.q} inputs/{len(rules.outputs)} outputs for {policy.n_classes} classes"
        )
    inputs = []
    for var, f in zip(rules.inputs, policy.shares):
        span = var.hi - var.lo
        sets = {
            lab: GaussianMF((mf.mean - var.lo) / span * f, mf.sigma / span * f)
            for lab, mf in var.sets.items()
        }
        inputs.append(LinguisticVariable(var.name, 0.0, f, sets))
    rb = RuleBase(tuple(inputs), rules.outputs, rules.rules, rules.resolution)
    return FrbSystem(policy, rb)


def compute_inputs(measured: Sequence[float], policy: AllocationPolicySet) -> tuple[float, ...]:
    """Normalized class loads min(b_j/B_T, B_j/B_T)."""
    if len(measured) != policy.n_classes:
        raise InvalidMeasurementError(f"expected {policy.n_classes} class aggregates")
    out = []
    for b, share in zip(measured, policy.shares):
        if b < 0:
            raise InvalidMeasurementError(f"negative aggregate bandwidth {b}")
        out.append(min(b / policy.total, share))
    return tuple(out)


def thresholds_from_fuzzy(fuzzy: Sequence[float], policy: AllocationPolicySet) -> tuple[float, ...]:
    return tuple(min(policy.total, max(bj, f)) for bj, f in zip(policy.base, fuzzy))


def compute_allocations(frb: FrbSystem, inputs: Sequence[float]) -> AllocationResult:
    y = infer(frb.rule_base, inputs)
    fuzzy = tuple(v * frb.policy.total for v in y)
    return AllocationResult(fuzzy, thresholds_from_fuzzy(fuzzy, frb.policy))
