import math
import random

import pytest

from fuzzyqos.errors import OversizeError, UndefinedMetricError
from fuzzyqos.metrics import (
    RunStats,
    ScenarioReport,
    availability,
    blocking_per_class,
    cdf_at,
    enumerate_states,
    erlang_b,
    kaufman_roberts,
    oracle_inputs,
    product_form_oracle,
    utilization_cdf,
)
from fuzzyqos.netsim import DEFAULT_RATES
from fuzzyqos.allocator import AllocationPolicySet
from fuzzyqos.netsim import lifetime_from_rho

POLICY = AllocationPolicySet.default()


def stats(accepted, generated=(5000, 5000, 5000), util=()):
    rej = [g - a for g, a in zip(generated, accepted)]
    return RunStats(list(generated), list(accepted), rej, [[10.0 * i, 0, 0, 0, 0, u] for i, u in enumerate(util)])


def loads(rho):
    return [DEFAULT_RATES[j - 1] * lifetime_from_rho(rho, j, POLICY) for j in (1, 2, 3)]


class TestAvailability:
    def test_all(self):
        assert availability(stats((5000, 5000, 5000))) == 1.0

    def test_arithmetic(self):
        assert availability(stats((4800, 4250, 4450))) == 0.9

    def test_zero(self):
        with pytest.raises(UndefinedMetricError):
            availability(stats((0, 0, 0), (0, 0, 0)))

    def test_pooled(self):
        assert availability([stats((5000, 5000, 5000)), stats((0, 0, 0))]) == 0.5


class TestBlocking:
    def test_values(self):
        assert blocking_per_class(stats((4800, 5000, 0))) == [0.04, 0.0, 1.0]

    def test_zero_class(self):
        with pytest.raises(UndefinedMetricError):
            blocking_per_class(stats((1, 0, 0), (1, 0, 0)))

    def test_invariant(self):
        with pytest.raises(Exception):
            RunStats([5], [3], [3])


class TestCdf:
    def test_constant(self):
        pts = utilization_cdf([0.5] * 7)
        assert cdf_at(pts, 0.49) == 0.0
        assert cdf_at(pts, 0.5) == 1.0 and cdf_at(pts, 0.9) == 1.0

    def test_quartiles(self):
        assert cdf_at(utilization_cdf([0.2, 0.4, 0.6, 0.8]), 0.4) == 0.5

    def test_capacity_scaling(self):
        vals, f = utilization_cdf([3200, 6400, 0], 6400)
        assert list(vals) == [0.0, 0.5, 1.0] and f[-1] == 1.0

    def test_empty(self):
        with pytest.raises(UndefinedMetricError):
            utilization_cdf([])


class TestOracles:
    def test_erlang_b(self):
        assert erlang_b(2, 1.0) == pytest.approx(0.2, abs=1e-15)
        assert product_form_oracle(2, [1], [1.0], [2]) == pytest.approx([0.2], abs=1e-15)

    def test_zero_load(self):
        assert product_form_oracle(200, [1, 12, 8], [0.0, 0.0, 0.0]) == [0.0, 0.0, 0.0]

    def test_impossible_fit(self):
        assert product_form_oracle(10, [1, 12], [1.0, 1.0])[1] == 1.0

    def test_oversize(self):
        with pytest.raises(OversizeError):
            product_form_oracle(200, [1, 1, 1], [1.0, 1.0, 1.0], max_states=1000)

    def test_matches_explicit_enumeration(self):
        cap, sizes, a, caps = 12, [1, 3, 4], [2.0, 0.7, 0.5], [8, 9, 12]
        states = list(enumerate_states(cap, sizes, caps))
        w = [math.prod(x**n / math.factorial(n) for x, n in zip(a, s)) for s in states]
        admissible = set(states)
        expect = []
        for j in range(3):
            blocked = 0.0
            for s, wt in zip(states, w):
                nxt = list(s)
                nxt[j] += 1
                if tuple(nxt) not in admissible or nxt[j] * sizes[j] > caps[j]:
                    blocked += wt
            expect.append(blocked / sum(w))
        assert product_form_oracle(cap, sizes, a, caps) == pytest.approx(expect, abs=1e-13)

    @pytest.mark.parametrize("rho", [0.2, 0.4, 0.6, 0.8])
    def test_enumeration_equals_recursion(self, rho):
        pf = product_form_oracle(200, [1, 12, 8], loads(rho))
        kr = kaufman_roberts(200, [1, 12, 8], loads(rho))
        for x, y in zip(pf, kr):
            assert abs(x - y) <= 1e-12

    @pytest.mark.parametrize("rho", [0.2, 0.4, 0.6, 0.8])
    def test_capped_equals_independent_erlang_b(self, rho):
        # caps sum to the capacity, so the total constraint never binds
        a = loads(rho)
        got = product_form_oracle(200, [1, 12, 8], a, [60, 80, 60])
        want = [erlang_b(60, a[0]), erlang_b(6, a[1]), erlang_b(7, a[2])]
        assert got == pytest.approx(want, abs=1e-12)

    def test_oracle_inputs(self):
        life = [lifetime_from_rho(0.2, j, POLICY) for j in (1, 2, 3)]
        args = oracle_inputs(life, base=POLICY.base)
        assert args["capacity"] == 200 and args["sizes"] == [1, 12, 8] and args["caps"] == [60, 80, 60]
        assert args["loads"] == pytest.approx([12.0, 4 / 3, 1.5])


def test_report_order_independent():
    rng = random.Random(2)
    runs = []
    for _ in range(10):
        acc = [rng.randint(4000, 5000) for _ in range(3)]
        runs.append(stats(acc, util=[rng.random() for _ in range(20)]))
    a = ScenarioReport.from_runs("frb", 0.4, runs)
    rng.shuffle(runs)
    b = ScenarioReport.from_runs("frb", 0.4, runs)
    assert a == b
    f = [p for _, p in a.cdf]
    assert f == sorted(f) and f[-1] == 1.0


def test_runstats_json_round_trip():
    s = stats((4800, 4250, 4450), util=[0.1, 0.2])
    assert RunStats.from_json(s.to_json()) == s
