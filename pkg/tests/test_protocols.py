from __future__ import annotations

import math

import numpy as np
import pytest
from conftest import channels, states
from hypothesis import given, settings

from qutrit_chain.analysis import (
    envelope_channel,
    family_probabilities,
    gctp4_class_probabilities,
    p_gctp4,
    p_pgctp,
    p_sctp,
)
from qutrit_chain.protocols import (
    ProtocolKind,
    ProtocolSpec,
    TooManyHops,
    enumerate_outcomes,
    run_gctp4,
    run_pgctp,
    run_sctp,
    run_trial,
    simulate,
    teleport_hop,
)
from qutrit_chain.measurement import gbm_probabilities
from qutrit_chain.qutrit_core import fidelity, haar_random_state, make_channel, tensor

SCTP3 = ProtocolSpec(ProtocolKind.SCTP, steps=3)
GCTP4 = ProtocolSpec(ProtocolKind.GCTP4)
PGCTP2 = ProtocolSpec(ProtocolKind.PGCTP, segments=2)
GENERIC = make_channel(0.5, 0.6, math.sqrt(0.39))
MAXIMAL = envelope_channel(1 / math.sqrt(3), "max")


def test_spec_geometry():
    assert (SCTP3.hops, SCTP3.parties) == (3, 4)
    assert (GCTP4.hops, GCTP4.parties) == (3, 4)
    assert (PGCTP2.hops, PGCTP2.parties) == (6, 7)
    with pytest.raises(ValueError):
        ProtocolSpec(ProtocolKind.SCTP, steps=0)
    with pytest.raises(ValueError):
        ProtocolSpec(ProtocolKind.GCTP4, segments=2)


def test_maximal_channel_teleports_perfectly():
    for seed in range(50):
        psi = haar_random_state(seed)
        out, msg = teleport_hop(psi, MAXIMAL, np.random.default_rng(seed))
        assert fidelity(out, psi) == pytest.approx(1.0, abs=1e-12)
        assert msg.hop_index == 0


@pytest.mark.parametrize("runner", [
    lambda s, c, r: run_sctp(s, c, 3, r),
    lambda s, c, r: run_gctp4(s, c, r),
    lambda s, c, r: run_pgctp(s, c, 2, r),
])
def test_successful_trials_return_the_input(runner):
    psi = haar_random_state(3)
    wins = 0
    for seed in range(300):
        res = runner(psi, GENERIC, np.random.default_rng(seed))
        if res.success:
            wins += 1
            assert fidelity(res.final_state, psi) >= 1 - 1e-9
        else:
            assert res.final_state is None
    assert wins > 0


def test_message_log_counts_hops():
    psi = haar_random_state(1)
    for seed in range(50):
        res = run_trial(PGCTP2, psi, GENERIC, np.random.default_rng(seed), check=True)
        if res.success:
            assert [m.hop_index for m in res.message_log] == list(range(6))
            assert len(res.recovery_classes) == 2
        else:
            assert len(res.message_log) in (3, 6)


@settings(max_examples=25)
@given(states(), channels())
def test_enumeration_closes_and_matches_closed_forms(psi, ch):
    for spec, want in ((SCTP3, p_sctp(ch, 3)), (GCTP4, p_gctp4(ch)), (PGCTP2, p_pgctp(ch, 2))):
        d = enumerate_outcomes(spec, psi, ch)
        assert d.total_probability == pytest.approx(1.0, abs=1e-10)
        assert d.total_success_probability == pytest.approx(want, abs=1e-10)
        for st in d.success_states():
            assert fidelity(st, psi) >= 1 - 1e-9


@settings(max_examples=15)
@given(states(), channels())
def test_full_branching_agrees_with_aggregated(psi, ch):
    agg = enumerate_outcomes(GCTP4, psi, ch)
    full = enumerate_outcomes(GCTP4, psi, ch, full=True, merge=False)
    assert full.total_success_probability == pytest.approx(agg.total_success_probability, abs=1e-12)
    assert len(full.entries) > len(agg.entries)


@given(states(), channels())
def test_first_segment_probabilities(psi, ch):
    sctp = enumerate_outcomes(ProtocolSpec(ProtocolKind.SCTP), psi, ch).class_probabilities
    for k, p in family_probabilities(ch, psi).items():
        assert sctp[k] == pytest.approx(p, abs=1e-12)
    gctp = enumerate_outcomes(GCTP4, psi, ch).class_probabilities
    closed = gctp4_class_probabilities(ch, psi)
    assert sorted(gctp) == list(range(1, 11))
    for k, p in closed.items():
        assert gctp[k] == pytest.approx(p, abs=1e-12)


def test_known_values():
    psi = haar_random_state(0)
    assert enumerate_outcomes(SCTP3, psi, GENERIC).total_success_probability == pytest.approx(0.421875, abs=1e-12)
    assert enumerate_outcomes(GCTP4, psi, GENERIC).total_success_probability == pytest.approx(0.67935, abs=1e-12)
    two = enumerate_outcomes(PGCTP2, psi, GENERIC).total_success_probability
    assert two == pytest.approx(0.67935**2, abs=1e-10)


def test_long_chain_stays_tractable_with_merging():
    ch = envelope_channel(0.5, "max")
    d = enumerate_outcomes(ProtocolSpec(ProtocolKind.SCTP, steps=15), haar_random_state(2), ch)
    assert d.total_success_probability == pytest.approx(0.75**15, rel=1e-10)


def test_hop_bound():
    psi = haar_random_state(0)
    with pytest.raises(TooManyHops):
        enumerate_outcomes(ProtocolSpec(ProtocolKind.SCTP, steps=16), psi, GENERIC)
    with pytest.raises(TooManyHops):
        enumerate_outcomes(ProtocolSpec(ProtocolKind.PGCTP, segments=6), psi, GENERIC)


def test_zero_a0_is_plain_failure():
    ch = make_channel(0.0, math.sqrt(0.5), math.sqrt(0.5))
    psi = haar_random_state(4)
    for spec in (SCTP3, GCTP4):
        assert enumerate_outcomes(spec, psi, ch).total_success_probability == 0.0
        assert simulate(spec, psi, ch, 200, seed=1).successes == 0


def test_maximal_channel_always_succeeds():
    s = simulate(GCTP4, haar_random_state(1), MAXIMAL, 1000, seed=1)
    assert s.successes == 1000


def test_simulation_is_deterministic_and_worker_independent():
    psi = haar_random_state(9)
    a = simulate(GCTP4, psi, GENERIC, 400, seed=17)
    b = simulate(GCTP4, psi, GENERIC, 400, seed=17)
    c = simulate(GCTP4, psi, GENERIC, 400, seed=17, workers=2)
    assert a == b == c
    assert sum(a.class_counts.values()) == 400


def test_simulation_rejects_zero_trials():
    with pytest.raises(ValueError):
        simulate(GCTP4, haar_random_state(0), GENERIC, 0, seed=0)


def test_hop_outcomes_follow_exact_distribution():
    psi = haar_random_state(21)
    probs = gbm_probabilities(tensor(psi, GENERIC.state), (0, 1))
    rng = np.random.default_rng(2024)
    draws = 100_000
    counts = dict.fromkeys(probs, 0)
    for _ in range(draws):
        _, msg = teleport_hop(psi, GENERIC, rng)
        counts[msg.outcome] += 1
    for o, p in probs.items():
        assert abs(counts[o] / draws - p) <= 3 * math.sqrt(p * (1 - p) / draws)


def test_family_zero_output_pattern():
    psi = haar_random_state(8)
    want = np.array(GENERIC.coeffs) * psi.amps
    want /= np.linalg.norm(want)
    seen = False
    for seed in range(40):
        out, msg = teleport_hop(psi, GENERIC, np.random.default_rng(seed))
        if msg.outcome.m == 0:
            seen = True
            assert np.allclose(out.amps, want, atol=1e-12)
    assert seen
