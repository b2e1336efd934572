from __future__ import annotations

import itertools
import math

import numpy as np
import pytest
from conftest import channels, states
from hypothesis import given
from hypothesis import strategies as st

from qutrit_chain.analysis import family_probabilities
from qutrit_chain.measurement import (
    ALL_OUTCOMES,
    DuplicateIndex,
    GbmOutcome,
    IncompleteKraus,
    KrausPair,
    ZeroProbabilityOutcome,
    apply_generalized_measurement,
    gbm_basis,
    gbm_collapse,
    gbm_probabilities,
    is_orthonormal,
    kraus_branches,
    sample_gbm,
)
from qutrit_chain.qutrit_core import IndexOutOfRange, PureState, QutritOperator, make_state, tensor

W = np.exp(2j * np.pi / 3)


def bell_ket(m: int, n: int) -> np.ndarray:
    """Written out from the definition with explicit basis kets."""
    ket = np.zeros(9, dtype=complex)
    for j in range(3):
        e = np.zeros(9)
        e[3 * j + (j + m) % 3] = 1
        ket += W ** (j * n) * e
    return ket / math.sqrt(3)


def project_oracle(register: np.ndarray, n: int, pair: tuple[int, int], m: int, k: int) -> np.ndarray:
    """Brute-force contraction over every basis index."""
    phi = bell_ket(m, k).reshape(3, 3)
    rest = [q for q in range(n) if q not in pair]
    out = np.zeros(3 ** len(rest), dtype=complex)
    for idx in itertools.product(range(3), repeat=n):
        r = 0
        for q in rest:
            r = 3 * r + idx[q]
        flat = 0
        for d in idx:
            flat = 3 * flat + d
        out[r] += np.conj(phi[idx[pair[0]], idx[pair[1]]]) * register[flat]
    return out


class FixedDraw:
    def __init__(self, u: float):
        self.u = u

    def random(self) -> float:
        return self.u


def test_basis_matches_definition_and_is_orthonormal():
    assert is_orthonormal()
    for outcome, ket in gbm_basis():
        assert np.allclose(ket.amps, bell_ket(*outcome), atol=1e-15)
    assert [o for o, _ in gbm_basis()] == list(ALL_OUTCOMES)


@pytest.mark.parametrize("pair", [(0, 1), (1, 0), (0, 2), (2, 1)])
def test_collapse_matches_brute_force(pair):
    rng = np.random.default_rng(sum(pair))
    reg = PureState.from_vector(rng.standard_normal(27) + 1j * rng.standard_normal(27))
    probs = gbm_probabilities(reg, pair)
    for o in ALL_OUTCOMES:
        raw = project_oracle(reg.amps, 3, pair, *o)
        p = float(np.vdot(raw, raw).real)
        assert probs[o] == pytest.approx(p, abs=1e-13)
        rec = gbm_collapse(reg, pair, o)
        assert rec.probability == pytest.approx(p, abs=1e-13)
        assert np.allclose(rec.post_state.amps, raw / math.sqrt(p), atol=1e-12)


@given(states(), channels())
def test_outcome_split_is_uniform_within_a_family(psi, ch):
    probs = gbm_probabilities(tensor(psi, ch.state), (0, 1))
    fam = family_probabilities(ch, psi)
    for (m, n), p in probs.items():
        assert p == pytest.approx(fam[m + 1] / 3, abs=1e-12)
    assert sum(probs.values()) == pytest.approx(1.0, abs=1e-12)


def test_pair_validation():
    reg = tensor(make_state(1, 0, 0), make_state(0, 1, 0))
    with pytest.raises(DuplicateIndex):
        gbm_probabilities(reg, (1, 1))
    with pytest.raises(IndexOutOfRange):
        gbm_probabilities(reg, (0, 2))
    with pytest.raises(IndexOutOfRange):
        gbm_collapse(reg, (0, 1), GbmOutcome(1, 0))


def test_zero_probability_outcome():
    zero = make_state(1, 0, 0)
    reg = tensor(tensor(zero, zero), zero)
    with pytest.raises(ZeroProbabilityOutcome):
        gbm_collapse(reg, (0, 1), GbmOutcome(1, 0))


def test_sampling_frequencies_follow_probabilities():
    rng = np.random.default_rng(11)
    reg = PureState.from_vector(rng.standard_normal(27) + 1j * rng.standard_normal(27))
    probs = gbm_probabilities(reg, (0, 1))
    draws = 20_000
    counts = dict.fromkeys(ALL_OUTCOMES, 0)
    for _ in range(draws):
        counts[sample_gbm(reg, (0, 1), rng).outcome] += 1
    for o, p in probs.items():
        assert abs(counts[o] / draws - p) <= 4 * math.sqrt(p * (1 - p) / draws) + 1e-9


@given(st.floats(min_value=0.0, max_value=0.999999))
def test_sampling_never_returns_impossible_outcome(u):
    zero = make_state(1, 0, 0)
    reg = tensor(tensor(zero, zero), zero)
    rec = sample_gbm(reg, (0, 1), FixedDraw(u))
    assert rec.outcome.m == 0 and rec.probability > 0


def _pair(diag):
    s = np.asarray(diag, dtype=float)
    return KrausPair(QutritOperator.diag(s), QutritOperator.diag(np.sqrt(1 - s * s)))


@given(states(), st.lists(st.floats(min_value=0, max_value=1), min_size=3, max_size=3))
def test_kraus_branches_conserve_probability(psi, diag):
    (p_s, v_s), (p_f, v_f) = kraus_branches(psi, 0, _pair(diag))
    assert p_s + p_f == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(v_s, np.asarray(diag) * psi.amps)


def test_incomplete_kraus_rejected():
    bad = KrausPair(QutritOperator.identity(), QutritOperator.identity())
    with pytest.raises(IncompleteKraus):
        kraus_branches(make_state(1, 0, 0), 0, bad)


def test_generalized_measurement_branch_choice():
    psi = make_state(1, 1, 0)
    pair = _pair([1.0, 0.0, 1.0])  # success keeps |0>, failure keeps |1>
    ok = apply_generalized_measurement(psi, 0, pair, FixedDraw(0.1))
    assert ok.outcome is True and ok.probability == pytest.approx(0.5)
    assert np.allclose(ok.post_state.amps, [1, 0, 0])
    bad = apply_generalized_measurement(psi, 0, pair, FixedDraw(0.9))
    assert bad.outcome is False
    assert np.allclose(bad.post_state.amps, [0, 1, 0])
