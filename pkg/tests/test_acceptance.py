"""End-to-end acceptance checks. Each test prints one PASS/FAIL line.

The sweep fixture runs 3 modes x 4 load ratios x 10 seeds x 15000 requests.
Set FUZZYQOS_JOBS to spread it over worker processes.
"""

import itertools
import os
import random
import time

import numpy as np
import pytest

from fuzzyqos.admission import AdmissionMode
from fuzzyqos.allocator import AllocationPolicySet, build_frb, compute_allocations, default_rule_table
from fuzzyqos.experiments import SweepSpec, compare_to_oracle, sweep
from fuzzyqos.fuzzy import GaussianMF, RuleBase, infer, membership, parse_rule_file, serialize_rule_base
from fuzzyqos.marking import MarkingConfig, run_marking
from fuzzyqos.metrics import ScenarioReport
from fuzzyqos.monitor import InterfaceCounters, Sample, bandwidth, utilization
from fuzzyqos.netsim import RunConfig, lifetime_from_rho, run_scenario

POLICY = AllocationPolicySet.default()
RHOS = (0.2, 0.4, 0.6, 0.8)
CA, BP, FRB = (m.value for m in (AdmissionMode.CLASS_AGNOSTIC, AdmissionMode.BASE_POLICY, AdmissionMode.FRB_ADAPTIVE))


@pytest.fixture(scope="module")
def full_sweep():
    spec = SweepSpec(RunConfig(record_decisions=False), RHOS, tuple(AdmissionMode), 10)
    t0 = time.perf_counter()
    grouped = sweep(spec, int(os.environ.get("FUZZYQOS_JOBS", "1")))
    elapsed = time.perf_counter() - t0
    reps = {key: ScenarioReport.from_runs(key[0], key[1], runs) for key, runs in grouped.items()}
    return spec, grouped, reps, elapsed


# --- 1 -------------------------------------------------------------------

TABLE = {
    1: (15, 30, 45, 60),
    2: (1.667, 3.333, 5, 6.667),
    3: (1.875, 3.75, 5.625, 7.5),
}


def sig4(x):
    return float(f"{x:.4g}")


def test_c1_lifetime_table(criterion):
    bad = [
        (j, rho, lifetime_from_rho(rho, j, POLICY), want)
        for j, row in TABLE.items()
        for rho, want in zip(RHOS, row)
        if sig4(lifetime_from_rho(rho, j, POLICY)) != want
    ]
    criterion("C1 lifetime table, 12 entries to 4 significant figures", not bad, str(bad) if bad else "")


# --- 2, 3 ----------------------------------------------------------------


@pytest.mark.parametrize("mode,label", [(AdmissionMode.CLASS_AGNOSTIC, "C2"), (AdmissionMode.BASE_POLICY, "C3")])
def test_c2_c3_oracle_equivalence(full_sweep, criterion, mode, label):
    spec, grouped, _, elapsed = full_sweep
    checks = [c for rho in RHOS for c in compare_to_oracle(spec.base, rho, mode, grouped[(mode.value, rho)])]
    failed = [c.line() for c in checks if not c.passed]
    worst = max(abs(c.simulated - c.oracle) / c.se for c in checks)
    criterion(
        f"{label} {mode.value} blocking within 3 SE of the product-form oracle",
        not failed,
        "; ".join(failed) if failed else f"12 class/rho checks, worst {worst:.2f} SE",
    )


def test_c2_c3_runtime(full_sweep, criterion):
    per_rho = full_sweep[3] / len(RHOS)
    criterion("C2/C3 sweep runtime under 2 minutes per rho", per_rho < 120, f"{per_rho:.1f} s per rho, all three modes")


# --- 4 -------------------------------------------------------------------


def test_c4a_availability_non_increasing(full_sweep, criterion):
    reps = full_sweep[2]
    bad = []
    for mode in (CA, BP, FRB):
        av = [reps[(mode, rho)].availability for rho in RHOS]
        if any(b > a for a, b in zip(av, av[1:])):
            bad.append((mode, av))
    criterion("C4a availability non-increasing in rho for every mode", not bad, str(bad) if bad else "")


def test_c4b_frb_availability_vs_base(full_sweep, criterion):
    reps = full_sweep[2]
    pairs = [(rho, reps[(FRB, rho)].availability, reps[(BP, rho)].availability) for rho in RHOS]
    ok = all(f >= b for _, f, b in pairs)
    criterion("C4b FRB availability >= BasePolicy", ok, " ".join(f"rho={r}: {f:.4f}/{b:.4f}" for r, f, b in pairs))


def test_c4c_frb_video_data_blocking(full_sweep, criterion):
    reps = full_sweep[2]
    bad = []
    for rho in RHOS:
        f, b = reps[(FRB, rho)].blocking, reps[(BP, rho)].blocking
        if not (f[1] <= b[1] and f[2] <= b[2]):
            bad.append((rho, f[1:], b[1:]))
    criterion("C4c FRB video and data blocking <= BasePolicy", not bad, str(bad) if bad else "")


def test_c4d_voice_blocking_at_rho_04(full_sweep, criterion):
    reps = full_sweep[2]
    frb, ca = reps[(FRB, 0.4)].blocking[0], reps[(CA, 0.4)].blocking[0]
    criterion("C4d(i) rho=0.4 FRB voice blocking < ClassAgnostic voice blocking", frb < ca, f"{frb:.4f} vs {ca:.4f}")


def test_c4d_reference_point(full_sweep, criterion):
    reps = full_sweep[2]
    frb, ca = reps[(FRB, 0.4)].blocking[0], reps[(CA, 0.4)].blocking[0]
    ok = abs(frb - 0.04) <= 0.03 and abs(ca - 0.15) <= 0.03
    criterion("C4d(ii) rho=0.4 voice blocking near 4% (FRB) and 15% (ClassAgnostic), +-3 pp", ok,
              f"FRB {100 * frb:.2f}%, ClassAgnostic {100 * ca:.2f}%")


# --- 5 -------------------------------------------------------------------


def test_c5_measurement_math(criterion):
    speed = 10_000_000

    def s(t, octets):
        return Sample(t, InterfaceCounters(octets, octets, speed))

    cases = [
        (bandwidth(s(0, 0), s(10, 1_250_000)), 1_000_000.0),
        (utilization(s(0, 0), s(10, 1_250_000)), 10.0),
        (bandwidth(s(0, 2**32 - 100), s(10, 900)), 800.0),
        (bandwidth(s(0, 7), s(10, 7)), 0.0),
        (utilization(s(0, 0), s(10, 12_500_000)), 100.0),
    ]
    bad = [(got, want) for got, want in cases if got != want]
    criterion("C5 bandwidth/utilization bit-exact incl. counter wrap", not bad, str(bad) if bad else "")


# --- 6 -------------------------------------------------------------------


def test_c6_adaptive_marking(criterion):
    cfg = MarkingConfig()
    on = run_marking(cfg)
    off = run_marking(MarkingConfig(policy_enabled=False))
    nominal = cfg.test_rate
    t, th = on.times(), on.test_throughput()
    ok_on = on.trigger_time is not None and on.marked_time is not None
    detail = f"trigger at {on.trigger_time}s, marked at {on.marked_time}s"
    if ok_on:
        after = th[t >= on.trigger_time + cfg.sample_interval]
        ok_on = on.marked_time <= on.trigger_time + cfg.sample_interval and len(after) > 0 and after.min() >= 0.95 * nominal
        detail += f", min after {after.min():.1f}"
    off_min = off.test_throughput().min()
    peak = max(row[1] for row in off.series)
    ok_off = off_min < 0.95 * nominal
    criterion("C6 EF marking restores the test flow; disabled policy does not", ok_on and ok_off,
              f"{detail}; disabled min {off_min:.1f} at background peak {peak:.0f} kbit/s")


# --- 7 -------------------------------------------------------------------

GRID = np.linspace(0.0, 1.0, 21)


def test_c7a_membership(criterion):
    rng = random.Random(0)
    ok = True
    for _ in range(5000):
        mf = GaussianMF(rng.uniform(-1, 1), rng.uniform(0.01, 1))
        g = membership(mf, rng.uniform(-2, 2))
        ok &= 0.0 <= g <= 1.0 and membership(mf, mf.mean) == 1.0
    criterion("C7a membership bounded in [0,1], equals 1 at the mean", ok)


def test_c7b_centroid_symmetry(criterion):
    text = """\
input x universe 0 1
  set A gaussian mean=0.5 sigma=0.3
output y universe 0 1
  set LA gaussian mean=0 sigma=0.17
  set MA gaussian mean=0.5 sigma=0.13
  set HA gaussian mean=1 sigma=0.17
rule 1: IF x IS A THEN y IS MA
"""
    both = text + "rule 2: IF x IS A THEN y IS LA\nrule 3: IF x IS A THEN y IS HA\n"
    vals = [infer(parse_rule_file(t), (x,))[0] for t in (text, both) for x in (0.1, 0.5, 0.9)]
    ok = all(abs(v - 0.5) < 1e-12 for v in vals)
    criterion("C7b symmetric consequents defuzzify to the midpoint", ok, str(vals))


def test_c7c_rule_order(criterion):
    rb = default_rule_table()
    rng = random.Random(1)
    ok = True
    for _ in range(50):
        rules = list(rb.rules)
        rng.shuffle(rules)
        shuffled = RuleBase(rb.inputs, rb.outputs, tuple(rules))
        xs = [rng.random() for _ in range(3)]
        ok &= infer(shuffled, xs) == infer(rb, xs)
    criterion("C7c rule-order permutation invariance", ok)


def test_c7d_grid_convergence(criterion):
    rb = default_rule_table()
    fine = rb.with_resolution(401)
    drift = max(
        abs(a - b)
        for xs in itertools.product(GRID[::2], repeat=3)
        for a, b in zip(infer(rb, xs), infer(fine, xs))
    )
    criterion("C7d centroid drift N=201 vs N=401 < 1e-3", drift < 1e-3, f"max drift {drift:.2e}")


def test_c7e_rule_file_round_trip(criterion):
    rb = default_rule_table()
    text = serialize_rule_base(rb)
    ok = parse_rule_file(text) == rb and serialize_rule_base(parse_rule_file(text)) == text
    criterion("C7e rule-file round trip", ok)


@pytest.fixture(scope="module")
def grid_allocations():
    frb = build_frb(POLICY)
    axes = [GRID * f for f in POLICY.shares]
    out = np.empty((21, 21, 21, 2, 3))
    for i, j, k in itertools.product(range(21), repeat=3):
        res = compute_allocations(frb, (axes[0][i], axes[1][j], axes[2][k]))
        out[i, j, k, 0] = res.fuzzy
        out[i, j, k, 1] = res.thresholds
    return out


def test_c7f_threshold_dominance(grid_allocations, criterion):
    th = grid_allocations[..., 1, :]
    base = np.array(POLICY.base)
    ok = bool(np.all(th >= base) and np.all(th <= POLICY.total))
    criterion("C7f B_th >= B_j and <= B_T on the 21^3 grid", ok)


def test_c7g_other_class_monotonicity(grid_allocations, criterion):
    fls = grid_allocations[..., 0, :]
    worst, where = 0.0, None
    for j in range(3):
        for other in range(3):
            if other == j:
                continue
            rise = np.diff(fls[..., j], axis=other)
            m = float(rise.max())
            if m > worst:
                worst, where = m, (j + 1, other + 1)
    ok = worst <= 1e-9
    detail = "" if ok else f"B_FLS of class {where[0]} rises by up to {worst:.1f} kbit/s in class {where[1]} load"
    criterion("C7g default table: B_FLS non-increasing in other-class load on the 21^3 grid", ok, detail)


# --- 8 -------------------------------------------------------------------


def test_c8_determinism(criterion):
    configs = [
        RunConfig(seed=s, rho=rho, mode=m, requests=(2000, 2000, 2000), shadow=True)
        for s, rho, m in [(0, 0.2, AdmissionMode.FRB_ADAPTIVE), (3, 0.8, AdmissionMode.BASE_POLICY),
                          (11, 0.6, AdmissionMode.CLASS_AGNOSTIC)]
    ]
    configs.append(RunConfig(seed=5, rho=0.6, ewma_alpha=0.3, requests=(2000, 2000, 2000)))
    ok = all(run_scenario(c).to_json() == run_scenario(c).to_json() for c in configs)
    criterion("C8 identical RunConfig gives byte-identical RunStats JSON", ok, f"{len(configs)} configs")

