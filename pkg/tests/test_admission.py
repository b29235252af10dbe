import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fuzzyqos.admission import AdmissionMode, FlowRequest, LinkState, admit, check, release
from fuzzyqos.errors import ConfigurationError, InvalidRequestError, NotFoundError

BASE = (1920.0, 2560.0, 1920.0)
BITRATES = (32.0, 384.0, 256.0)


def state_with(aggregates, capacity=6400.0):
    """A LinkState holding one synthetic flow per non-empty class."""
    s = LinkState(capacity)
    for j, b in enumerate(aggregates, start=1):
        if b:
            admit(s, FlowRequest(-j, j, b), AdmissionMode.CLASS_AGNOSTIC)
    return s


def test_class_agnostic_capacity():
    s = state_with((3000, 3200, 0))
    d = admit(s, FlowRequest(1, 2, 384), AdmissionMode.CLASS_AGNOSTIC)
    assert not d and d.reason == "capacity"


def test_base_policy_class_cap():
    s = state_with((0, 2432, 568))
    assert s.total == 3000
    d = admit(s, FlowRequest(1, 2, 384), AdmissionMode.BASE_POLICY, BASE)
    assert not d and d.reason == "class-limit"


def test_frb_threshold():
    s = state_with((0, 2432, 568))
    d = admit(s, FlowRequest(1, 2, 384), AdmissionMode.FRB_ADAPTIVE, (1920, 2944, 1920))
    assert d.accepted
    assert s.aggregates[1] == 2816 and s.total == 3384


def test_frb_still_enforces_capacity():
    s = state_with((0, 2432, 3900))
    d = admit(s, FlowRequest(1, 2, 384), AdmissionMode.FRB_ADAPTIVE, (6400, 6400, 6400))
    assert not d and d.reason == "capacity"


def test_frb_needs_thresholds():
    with pytest.raises(ConfigurationError):
        admit(LinkState(6400.0), FlowRequest(1, 1, 32), AdmissionMode.FRB_ADAPTIVE)


def test_duplicate_flow():
    s = LinkState(6400.0)
    admit(s, FlowRequest(1, 1, 32), AdmissionMode.CLASS_AGNOSTIC)
    with pytest.raises(InvalidRequestError):
        admit(s, FlowRequest(1, 1, 32), AdmissionMode.CLASS_AGNOSTIC)


def test_invalid_request():
    with pytest.raises(InvalidRequestError):
        FlowRequest(1, 1, 0)
    with pytest.raises(InvalidRequestError):
        FlowRequest(1, 1, 32, lifetime=0)


def test_admit_release_restores_state():
    s = state_with((320, 768, 512))
    before = s.snapshot()
    admit(s, FlowRequest(9, 2, 384), AdmissionMode.CLASS_AGNOSTIC)
    release(s, 9)
    assert s.snapshot() == before


def test_release_empty():
    with pytest.raises(NotFoundError):
        release(LinkState(6400.0), 5)


def test_random_admit_release_no_drift():
    rng = random.Random(11)
    s = LinkState(6400.0)
    next_id = 0
    for _ in range(1000):
        j = rng.randrange(3)
        admit(s, FlowRequest(next_id, j + 1, BITRATES[j]), AdmissionMode.CLASS_AGNOSTIC)
        next_id += 1
        if s.active and rng.random() < 0.5:
            release(s, rng.choice(sorted(s.active)))
    while s.active:
        assert s.recompute() == s.aggregates
        release(s, next(iter(s.active)))
    assert s.aggregates == [0.0, 0.0, 0.0]


ops = st.lists(st.tuples(st.integers(0, 2), st.booleans()), max_size=300)


@settings(max_examples=60, deadline=None)
@given(ops, st.sampled_from(list(AdmissionMode)))
def test_safety_and_isolation(seq, mode):
    s = LinkState(6400.0)
    limits = {AdmissionMode.CLASS_AGNOSTIC: None, AdmissionMode.BASE_POLICY: BASE,
              AdmissionMode.FRB_ADAPTIVE: (2600.0, 3000.0, 2000.0)}[mode]
    for i, (j, drop) in enumerate(seq):
        admit(s, FlowRequest(i, j + 1, BITRATES[j]), mode, limits)
        if drop and s.active:
            release(s, min(s.active))
        assert s.total <= s.capacity
        assert s.recompute() == s.aggregates
        if mode is AdmissionMode.BASE_POLICY:
            assert all(b <= lim for b, lim in zip(s.aggregates, BASE))


@settings(max_examples=200)
@given(
    st.tuples(*[st.integers(0, 40) for _ in range(3)]),
    st.integers(1, 3),
    st.tuples(*[st.floats(0, 1) for _ in range(3)]),
)
def test_mode_dominance_same_state(counts, cls, extra):
    aggregates = tuple(n * b for n, b in zip(counts, BITRATES))
    if sum(aggregates) > 6400:
        return
    s = state_with(aggregates)
    thresholds = tuple(min(6400.0, bj + e * (6400 - bj)) for bj, e in zip(BASE, extra))
    req = FlowRequest(1, cls, BITRATES[cls - 1])
    base = check(s, req, AdmissionMode.BASE_POLICY, BASE).accepted
    frb = check(s, req, AdmissionMode.FRB_ADAPTIVE, thresholds).accepted
    agn = check(s, req, AdmissionMode.CLASS_AGNOSTIC).accepted
    assert (not base) or frb
    assert (not frb) or agn
