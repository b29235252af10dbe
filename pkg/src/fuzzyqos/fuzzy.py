"""
Mamdani fuzzy inference with Gaussian membership functions.

Rules fire with the min t-norm (AND) or max (OR), consequent sets are
clipped at the firing strength, clipped sets are combined with max, and
the aggregate is defuzzified by its centroid over a uniform grid.

Rule bases are read from and written to a small line-oriented text format::

    input Class1Load universe 0 0.3
      set LL gaussian mean=0 sigma=0.051
    output Class1Res universe 0 1
      set HA gaussian mean=1 sigma=0.17
    rule 1: IF Class1Load IS LL THEN Class1Res IS HA
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, InvalidInputError, InvalidParameterError, ParseError

DEFAULT_RESOLUTION = 201


@dataclass(frozen=True)
class GaussianMF:
    mean: float
    sigma: float

    def __post_init__(self):
        if not (math.isfinite(self.mean) and math.isfinite(self.sigma)) or self.sigma <= 0:
            raise InvalidParameterError(f"gaussian needs finite mean and sigma > 0, got {self}")

    def __call__(self, x):
        return membership(self, x)


def membership(mf: GaussianMF, x):
    """Grade of ``x`` in ``mf``: exp(-0.5 (x - mean)^2 / sigma^2).

    Accepts a scalar or an array. Scalars must be finite.
    """
    if mf.sigma <= 0:
        raise InvalidParameterError("sigma must be > 0")
    if np.ndim(x) == 0:
        if not math.isfinite(x):
            raise InvalidParameterError(f"non-finite input {x!r}")
        return math.exp(-0.5 * (x - mf.mean) ** 2 / mf.sigma**2)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise InvalidParameterError("non-finite input")
    return np.exp(-0.5 * (x - mf.mean) ** 2 / mf.sigma**2)


@dataclass(frozen=True)
class LinguisticVariable:
    name: str
    lo: float
    hi: float
    sets: Mapping[str, GaussianMF] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ConfigurationError(f"variable {self.name}: universe needs lo < hi")
        if not self.sets:
            raise ConfigurationError(f"variable {self.name}: no fuzzy sets")
        for label, mf in self.sets.items():
            if not label:
                raise ConfigurationError(f"variable {self.name}: empty label")
            if not self.lo <= mf.mean <= self.hi:
                raise ConfigurationError(
                    f"variable {self.name}: mean of {label} outside [{self.lo}, {self.hi}]"
                )
        # freeze the mapping so the variable is hashable-by-content and immutable
        object.__setattr__(self, "sets", dict(self.sets))

    def clamp(self, x: float) -> float:
        return min(max(x, self.lo), self.hi)

    def fuzzify(self, x: float) -> dict[str, float]:
        x = self.clamp(x)
        return {label: membership(mf, x) for label, mf in self.sets.items()}


class Connective(Enum):
    AND = "AND"
    OR = "OR"


@dataclass(frozen=True)
class FuzzyRule:
    """One IF-THEN rule. Antecedents and consequents index into the rule base's variables."""

    rule_id: int
    antecedents: tuple[tuple[int, str], ...]
    consequents: tuple[tuple[int, str], ...]
    connective: Connective = Connective.AND

    def __post_init__(self):
        object.__setattr__(self, "antecedents", tuple(tuple(a) for a in self.antecedents))
        object.__setattr__(self, "consequents", tuple(tuple(c) for c in self.consequents))
        if not self.antecedents or not self.consequents:
            raise ConfigurationError(f"rule {self.rule_id}: needs an antecedent and a consequent")


def fire_rule(rule: FuzzyRule, grades: Sequence[Mapping[str, float]]) -> float:
    """Firing strength from per-input membership grades (min for AND, max for OR)."""
    vals = [grades[i][label] for i, label in rule.antecedents]
    return min(vals) if rule.connective is Connective.AND else max(vals)


@dataclass(frozen=True)
class RuleBase:
    inputs: tuple[LinguisticVariable, ...]
    outputs: tuple[LinguisticVariable, ...]
    rules: tuple[FuzzyRule, ...]
    resolution: int = DEFAULT_RESOLUTION

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        object.__setattr__(self, "rules", tuple(self.rules))
        if not self.rules:
            raise ConfigurationError("rule base has no rules")
        if not self.inputs or not self.outputs:
            raise ConfigurationError("rule base needs at least one input and one output")
        if self.resolution < 101:
            raise ConfigurationError("discretization resolution must be >= 101")
        names = [v.name for v in self.inputs + self.outputs]
        if len(set(names)) != len(names):
            raise ConfigurationError("duplicate variable names")
        ids = [r.rule_id for r in self.rules]
        if len(set(ids)) != len(ids):
            raise ConfigurationError("duplicate rule ids")
        for r in self.rules:
            for i, label in r.antecedents:
                if not 0 <= i < len(self.inputs) or label not in self.inputs[i].sets:
                    raise ConfigurationError(f"rule {r.rule_id}: unknown antecedent {i}/{label}")
            for o, label in r.consequents:
                if not 0 <= o < len(self.outputs) or label not in self.outputs[o].sets:
                    raise ConfigurationError(f"rule {r.rule_id}: unknown consequent {o}/{label}")

    @property
    def q(self) -> int:
        return len(self.inputs)

    @property
    def m(self) -> int:
        return len(self.rules)

    def with_resolution(self, n: int) -> RuleBase:
        return RuleBase(self.inputs, self.outputs, self.rules, n)

    def input_index(self, name: str) -> int:
        return [v.name for v in self.inputs].index(name)

    def output_index(self, name: str) -> int:
        return [v.name for v in self.outputs].index(name)


def _trapezoid_weights(n: int) -> np.ndarray:
    w = np.ones(n)
    w[0] = w[-1] = 0.5
    return w


def firing_strengths(rb: RuleBase, inputs: Sequence[float]) -> np.ndarray:
    if len(inputs) != rb.q:
        raise InvalidInputError(f"expected {rb.q} inputs, got {len(inputs)}")
    for x in inputs:
        if not math.isfinite(x):
            raise InvalidInputError(f"non-finite input {x!r}")
    grades = [var.fuzzify(float(x)) for var, x in zip(rb.inputs, inputs)]
    return np.array([fire_rule(r, grades) for r in rb.rules])


def aggregate(rb: RuleBase, strengths: np.ndarray, output: int) -> tuple[np.ndarray, np.ndarray]:
    """Grid and max-of-clipped-consequents aggregate for one output variable."""
    var = rb.outputs[output]
    grid = np.linspace(var.lo, var.hi, rb.resolution)
    agg = np.zeros_like(grid)
    curves: dict[str, np.ndarray] = {}
    for r, s in zip(rb.rules, strengths):
        if s <= 0.0:
            continue
        for o, label in r.consequents:
            if o != output:
                continue
            if label not in curves:
                curves[label] = membership(var.sets[label], grid)
            np.maximum(agg, np.minimum(s, curves[label]), out=agg)
    return grid, agg


def centroid(grid: np.ndarray, agg: np.ndarray, lo: float, hi: float) -> float:
    w = _trapezoid_weights(len(grid)) * agg
    area = w.sum()
    if area <= 0.0:
        return 0.5 * (lo + hi)
    return float(min(max((w * grid).sum() / area, lo), hi))


def infer(rb: RuleBase, inputs: Sequence[float]) -> tuple[float, ...]:
    """Crisp value per output variable for the given input vector.

    Inputs outside a variable's universe are clamped. A zero-area aggregate
    yields the midpoint of the output universe.
    """
    strengths = firing_strengths(rb, inputs)
    out = []
    for o, var in enumerate(rb.outputs):
        grid, agg = aggregate(rb, strengths, o)
        out.append(centroid(grid, agg, var.lo, var.hi))
    return tuple(out)


# ---------------------------------------------------------------------------
# rule-file format

_VAR_RE = re.compile(r"^(input|output)\s+(\S+)\s+universe\s+(\S+)\s+(\S+)$")
_SET_RE = re.compile(r"^set\s+(\S+)\s+gaussian\s+mean=(\S+)\s+sigma=(\S+)$")
_RULE_RE = re.compile(r"^rule\s+(-?\d+)\s*:\s*IF\s+(.+?)\s+THEN\s+(.+)$", re.IGNORECASE)
_CLAUSE_RE = re.compile(r"^(\S+)\s+IS\s+(\S+)$", re.IGNORECASE)
_RES_RE = re.compile(r"^resolution\s+(\d+)$")


def _num(tok: str, lineno: int) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise ParseError(f"expected a number, got {tok!r}", lineno) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite number {tok!r}", lineno)
    return v


def parse_rule_file(text: str) -> RuleBase:
    """Parse rule-file text into a validated RuleBase."""
    # each entry: [kind, name, lo, hi, {label: mf}, lineno]
    variables: list[list] = []
    raw_rules: list[tuple[int, int, str, str]] = []
    resolution = DEFAULT_RESOLUTION
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if m := _VAR_RE.match(line):
            kind, name = m.group(1), m.group(2)
            if any(v[1] == name for v in variables):
                raise ParseError(f"duplicate variable {name!r}", lineno)
            variables.append([kind, name, _num(m.group(3), lineno), _num(m.group(4), lineno), {}, lineno])
        elif m := _SET_RE.match(line):
            if not variables:
                raise ParseError("set declared before any variable", lineno)
            label = m.group(1)
            sets = variables[-1][4]
            if label in sets:
                raise ParseError(f"duplicate label {label!r}", lineno)
            try:
                sets[label] = GaussianMF(_num(m.group(2), lineno), _num(m.group(3), lineno))
            except InvalidParameterError as e:
                raise ParseError(str(e), lineno) from None
        elif m := _RULE_RE.match(line):
            raw_rules.append((lineno, int(m.group(1)), m.group(2), m.group(3)))
        elif m := _RES_RE.match(line):
            resolution = int(m.group(1))
        else:
            raise ParseError(f"cannot parse {line!r}", lineno)

    inputs, outputs = [], []
    for kind, name, lo, hi, sets, lineno in variables:
        try:
            var = LinguisticVariable(name, lo, hi, sets)
        except ConfigurationError as e:
            raise ParseError(str(e), lineno) from None
        (inputs if kind == "input" else outputs).append(var)
    in_idx = {v.name: i for i, v in enumerate(inputs)}
    out_idx = {v.name: i for i, v in enumerate(outputs)}

    rules = []
    seen: set[int] = set()
    for lineno, rid, ante_text, cons_text in raw_rules:
        if rid in seen:
            raise ParseError(f"duplicate rule id {rid}", lineno)
        seen.add(rid)
        tokens = re.split(r"\s+(AND|OR)\s+", ante_text, flags=re.IGNORECASE)
        conns = {t.upper() for t in tokens[1::2]}
        if len(conns) > 1:
            raise ParseError("mixed AND/OR connectives in one rule", lineno)
        connective = Connective(conns.pop()) if conns else Connective.AND
        antecedents = []
        for clause in tokens[0::2]:
            var, label = _clause(clause, lineno)
            if var not in in_idx:
                raise ParseError(f"unknown input variable {var!r}", lineno)
            if label not in inputs[in_idx[var]].sets:
                raise ParseError(f"unknown label {label!r} for {var}", lineno)
            antecedents.append((in_idx[var], label))
        consequents = []
        for clause in cons_text.split(","):
            var, label = _clause(clause.strip(), lineno)
            if var not in out_idx:
                raise ParseError(f"unknown output variable {var!r}", lineno)
            if label not in outputs[out_idx[var]].sets:
                raise ParseError(f"unknown label {label!r} for {var}", lineno)
            consequents.append((out_idx[var], label))
        rules.append(FuzzyRule(rid, tuple(antecedents), tuple(consequents), connective))

    if not rules:
        raise ConfigurationError("rule file defines no rules")
    try:
        return RuleBase(tuple(inputs), tuple(outputs), tuple(rules), resolution)
    except ConfigurationError as e:
        raise ParseError(str(e)) from None


def _clause(text: str, lineno: int) -> tuple[str, str]:
    m = _CLAUSE_RE.match(text.strip())
    if not m:
        raise ParseError(f"malformed clause {text!r}", lineno)
    return m.group(1), m.group(2)


def serialize_rule_base(rb: RuleBase) -> str:
    lines = []
    if rb.resolution != DEFAULT_RESOLUTION:
        lines.append(f"resolution {rb.resolution}")
    for kind, vars_ in (("input", rb.inputs), ("output", rb.outputs)):
        for v in vars_:
            lines.append(f"{kind} {v.name} universe {v.lo!r} {v.hi!r}")
            for label, mf in v.sets.items():
                lines.append(f"  set {label} gaussian mean={mf.mean!r} sigma={mf.sigma!r}")
    for r in rb.rules:
        conn = f" {r.connective.value} "
        ante = conn.join(f"{rb.inputs[i].name} IS {label}" for i, label in r.antecedents)
        cons = ", ".join(f"{rb.outputs[o].name} IS {label}" for o, label in r.consequents)
        lines.append(f"rule {r.rule_id}: IF {ante} THEN {cons}")
    return "\n".join(lines) + "\n"
