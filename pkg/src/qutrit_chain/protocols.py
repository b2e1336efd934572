"""Chain protocols as a party-by-party state machine.

Every protocol is a sequence of *segments*: a run of teleportation hops with
unitary corrections only, followed by one recovery measurement at the party
closing the segment.  SCTP uses one-hop segments, GCTP4 a single three-hop
segment and PGCTP ``N`` three-hop segments.  Two backends share the same
primitives: sampled trials (:func:`run_trial`) and exhaustive outcome trees
(:func:`enumerate_outcomes`).
"""

from __future__ import annotations

import enum
import itertools
from collections import Counter
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .corrections import (
    IDENTITY_PASS,
    CollapseClass,
    classify_collapse,
    gctp_recovery,
    resolve_correction,
    single_step_recovery,
)
from .measurement import (
    MIN_PROBABILITY,
    GbmOutcome,
    KrausPair,
    RandomSource,
    apply_generalized_measurement,
    gbm_collapse,
    gbm_probabilities,
    kraus_branches,
    sample_gbm,
)
from .qutrit_core import (
    ALGEBRA_TOL,
    ChannelCoeffs,
    PureState,
    QutritError,
    apply_to_vector,
    fidelity,
    tensor,
)

GCTP_SEGMENT = 3
DEFAULT_MAX_HOPS = 15
FIDELITY_TOL = 1e-9


class ProtocolKind(str, enum.Enum):
    SCTP = "sctp"
    GCTP4 = "gctp4"
    PGCTP = "pgctp"


class TooManyHops(QutritError):
    pass


class PhaseMismatch(AssertionError):
    """Corrected states for one family disagree across the ``n`` outcomes."""


@dataclass(frozen=True)
class ProtocolSpec:
    kind: ProtocolKind
    segments: int = 1
    steps: int = 1

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", ProtocolKind(self.kind))
        if self.segments < 1 or self.steps < 1:
            raise ValueError("segments and steps must be positive")
        if self.kind is ProtocolKind.GCTP4 and self.segments != 1:
            raise ValueError("GCTP4 is a single three-hop segment")

    @property
    def segment_length(self) -> int:
        return 1 if self.kind is ProtocolKind.SCTP else GCTP_SEGMENT

    @property
    def n_segments(self) -> int:
        return self.steps if self.kind is ProtocolKind.SCTP else self.segments

    @property
    def hops(self) -> int:
        return self.segment_length * self.n_segments

    @property
    def parties(self) -> int:
        return self.hops + 1


class ClassicalMessage(NamedTuple):
    hop_index: int
    outcome: GbmOutcome


@dataclass(frozen=True)
class TrialResult:
    success: bool
    final_state: Optional[PureState]
    message_log: tuple[ClassicalMessage, ...]
    recovery_classes: tuple[CollapseClass, ...] = ()
    probability_weight: Optional[float] = None

    @property
    def recovery_class(self) -> Optional[CollapseClass]:
        return self.recovery_classes[-1] if self.recovery_classes else None


def _segment_recovery(channel: ChannelCoeffs, families: Sequence[int]) -> tuple[Optional[KrausPair], Optional[CollapseClass]]:
    """Recovery pair for a finished segment; ``None`` when a0 = 0 makes it impossible."""
    if len(families) == 1:
        pair = None if channel.a0 <= 0 else single_step_recovery(channel, families[0])
        return pair, None
    cls = classify_collapse(*families)
    if cls == 10:
        return IDENTITY_PASS, cls
    return (None if channel.a0 <= 0 else gctp_recovery(channel, cls)), cls


def _recovery_table(channel: ChannelCoeffs, segment_length: int) -> dict:
    """Every segment's recovery, keyed by the tuple of per-hop families."""
    return {
        fam: _segment_recovery(channel, fam) for fam in itertools.product(range(3), repeat=segment_length)
    }


def _corrected(record_state: PureState, outcome: GbmOutcome) -> PureState:
    vec = apply_to_vector(resolve_correction(outcome).entries, record_state.amps, 1, 0)
    return PureState._trusted(1, vec / np.sqrt(np.vdot(vec, vec).real))


def teleport_hop(
    state: PureState, channel: ChannelCoeffs, rng: RandomSource, hop_index: int = 0
) -> tuple[PureState, ClassicalMessage]:
    """Teleport one qutrit across a fresh copy of ``channel``.

    The sender measures (input, own half) in the generalized Bell basis; the
    receiver applies the matching correction unitary.
    """
    if state.n_qutrits != 1:
        raise QutritError("teleport_hop moves a single qutrit")
    register = tensor(state, channel.state)
    record = sample_gbm(register, (0, 1), rng)
    return _corrected(record.post_state, record.outcome), ClassicalMessage(hop_index, record.outcome)


def run_trial(
    spec: ProtocolSpec,
    state: PureState,
    channel: ChannelCoeffs,
    rng: RandomSource,
    check: bool = False,
    recoveries: Optional[dict] = None,
) -> TrialResult:
    """One sampled run; aborts at the first failed recovery.

    With ``check`` set, a success whose final state is not the input (fidelity
    below ``1 - 1e-9``) raises ``AssertionError``.
    """
    if recoveries is None:
        recoveries = _recovery_table(channel, spec.segment_length)
    current = state
    log: list[ClassicalMessage] = []
    classes: list[CollapseClass] = []
    for _ in range(spec.n_segments):
        families = []
        for _ in range(spec.segment_length):
            current, msg = teleport_hop(current, channel, rng, hop_index=len(log))
            log.append(msg)
            families.append(msg.outcome.m)
        kraus, cls = recoveries[tuple(families)]
        if cls is not None:
            classes.append(cls)
        if kraus is None:
            return TrialResult(False, None, tuple(log), tuple(classes))
        if kraus is IDENTITY_PASS:
            continue
        record = apply_generalized_measurement(current, 0, kraus, rng)
        if not record.outcome:
            return TrialResult(False, None, tuple(log), tuple(classes))
        current = record.post_state
    if check:
        f = fidelity(current, state)
        assert f >= 1 - FIDELITY_TOL, f"successful trial ended with fidelity {f!r}"
    return TrialResult(True, current, tuple(log), tuple(classes))


def run_sctp(state: PureState, channel: ChannelCoeffs, steps: int, rng: RandomSource) -> TrialResult:
    return run_trial(ProtocolSpec(ProtocolKind.SCTP, steps=steps), state, channel, rng)


def run_gctp4(state: PureState, channel: ChannelCoeffs, rng: RandomSource) -> TrialResult:
    return run_trial(ProtocolSpec(ProtocolKind.GCTP4), state, channel, rng)


def run_pgctp(state: PureState, channel: ChannelCoeffs, segments: int, rng: RandomSource) -> TrialResult:
    return run_trial(ProtocolSpec(ProtocolKind.PGCTP, segments=segments), state, channel, rng)


# ---------------------------------------------------------------------------
# exact backend


class Leaf(NamedTuple):
    probability: float
    post_state: Optional[PureState]
    success: bool


@dataclass
class OutcomeDistribution:
    """Exhaustive outcome tree flattened to ``history -> Leaf``.

    History events are tuples: ``("gbm", hop, m, n)`` (``n`` is ``None`` when
    the three ``n`` outcomes were aggregated), ``("recover", segment, class,
    "S" | "F" | "pass")`` and ``("segments_ok", k, group)`` standing for every
    history of ``k`` completed segments that ended in the same state.
    ``class_probabilities`` holds the mass of each family (SCTP, keyed ``m+1``)
    or collapse class (GCTP/PGCTP) reached in the first segment.
    """

    spec: ProtocolSpec
    entries: dict[tuple, Leaf] = field(default_factory=dict)
    class_probabilities: dict[int, float] = field(default_factory=dict)

    @property
    def total_probability(self) -> float:
        return sum(leaf.probability for leaf in self.entries.values())

    @property
    def total_success_probability(self) -> float:
        return sum(leaf.probability for leaf in self.entries.values() if leaf.success)

    def success_states(self) -> list[PureState]:
        return [leaf.post_state for leaf in self.entries.values() if leaf.success and leaf.post_state is not None]


class _Node(NamedTuple):
    history: tuple
    probability: float
    state: PureState
    families: tuple[int, ...]


def _expand_hop(node: _Node, channel: ChannelCoeffs, hop: int, full: bool) -> list[_Node]:
    register = tensor(node.state, channel.state)
    probs = gbm_probabilities(register, (0, 1))
    children = []
    for m in range(3):
        live = [GbmOutcome(m, n) for n in range(3) if probs[GbmOutcome(m, n)] >= MIN_PROBABILITY]
        corrected = [_corrected(gbm_collapse(register, (0, 1), o).post_state, o) for o in live]
        if full:
            for o, st in zip(live, corrected):
                children.append(
                    _Node(node.history + (("gbm", hop, m, o.n),), node.probability * probs[o], st, node.families + (m,))
                )
            continue
        if not live:
            continue
        ref = corrected[0]
        for st in corrected[1:]:
            if np.max(np.abs(st.amps - ref.amps)) > ALGEBRA_TOL:
                raise PhaseMismatch(f"family m={m}: corrected states differ across n")
        p = sum(probs[o] for o in live)
        children.append(_Node(node.history + (("gbm", hop, m, None),), node.probability * p, ref, node.families + (m,)))
    return children


def _merge(nodes: list[_Node], completed: int) -> list[_Node]:
    groups: list[list[_Node]] = []
    for node in nodes:
        for g in groups:
            if fidelity(g[0].state, node.state) >= 1 - ALGEBRA_TOL:
                g.append(node)
                break
        else:
            groups.append([node])
    return [
        _Node((("segments_ok", completed, i),), sum(n.probability for n in g), g[0].state, ())
        for i, g in enumerate(groups)
    ]


def enumerate_outcomes(
    spec: ProtocolSpec,
    state: PureState,
    channel: ChannelCoeffs,
    *,
    full: bool = False,
    merge: bool = True,
    max_hops: int = DEFAULT_MAX_HOPS,
) -> OutcomeDistribution:
    """Exact distribution over every classical history and recovery branch.

    ``full`` keeps all nine GBM outcomes per hop; otherwise the three ``n``
    outcomes of each family are merged after checking that their corrected
    states coincide.  With ``merge`` set, successful branches that end a
    segment in the same state are pooled before the next segment starts.
    """
    if spec.hops > max_hops:
        raise TooManyHops(f"{spec.hops} hops exceeds the bound of {max_hops}")
    dist = OutcomeDistribution(spec)
    table = _recovery_table(channel, spec.segment_length)
    alive = [_Node((), 1.0, state, ())]
    hop = 0
    for seg in range(spec.n_segments):
        for _ in range(spec.segment_length):
            alive = [child for node in alive for child in _expand_hop(node, channel, hop, full)]
            hop += 1
        survivors = []
        for node in alive:
            kraus, cls = table[node.families]
            label = int(cls) if cls is not None else node.families[0] + 1
            if seg == 0:
                dist.class_probabilities[label] = dist.class_probabilities.get(label, 0.0) + node.probability
            if kraus is None:
                dist.entries[node.history + (("recover", seg, label, "F"),)] = Leaf(node.probability, None, False)
                continue
            if kraus is IDENTITY_PASS:
                survivors.append(node._replace(history=node.history + (("recover", seg, label, "pass"),), families=()))
                continue
            (p_s, v_s), (p_f, v_f) = kraus_branches(node.state, 0, kraus)
            if p_f >= MIN_PROBABILITY:
                post = PureState(1, v_f / np.sqrt(p_f))
                dist.entries[node.history + (("recover", seg, label, "F"),)] = Leaf(node.probability * p_f, post, False)
            if p_s >= MIN_PROBABILITY:
                post = PureState(1, v_s / np.sqrt(p_s))
                survivors.append(_Node(node.history + (("recover", seg, label, "S"),), node.probability * p_s, post, ()))
        alive = _merge(survivors, seg + 1) if merge and seg + 1 < spec.n_segments else survivors
    for node in alive:
        dist.entries[node.history] = Leaf(node.probability, node.state, True)
    return dist


# ---------------------------------------------------------------------------
# Monte Carlo driver


@dataclass
class SimulationSummary:
    trials: int
    successes: int
    min_fidelity: Optional[float]
    mean_fidelity: Optional[float]
    class_counts: dict[int, int]

    @property
    def frequency(self) -> float:
        return self.successes / self.trials


def _simulate_chunk(args: tuple) -> tuple[int, list[float], Counter]:
    spec, state, channel, seed, start, stop, check = args
    successes = 0
    fids: list[float] = []
    classes: Counter = Counter()
    table = _recovery_table(channel, spec.segment_length)
    for i in range(start, stop):
        rng = np.random.default_rng(seed + i)
        res = run_trial(spec, state, channel, rng, check=check, recoveries=table)
        if spec.kind is not ProtocolKind.SCTP and res.recovery_classes:
            classes[int(res.recovery_classes[0])] += 1
        if res.success:
            successes += 1
            fids.append(fidelity(res.final_state, state))
    return successes, fids, classes


def simulate(
    spec: ProtocolSpec,
    state: PureState,
    channel: ChannelCoeffs,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
    check: bool = False,
) -> SimulationSummary:
    """Run ``trials`` independent trials; trial ``i`` uses seed ``seed + i``.

    Results do not depend on ``workers``.  Class counts tally the first
    segment's collapse class (GCTP/PGCTP only).
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    workers = max(1, min(workers, trials))
    bounds = np.linspace(0, trials, workers + 1).astype(int)
    jobs = [(spec, state, channel, seed, int(a), int(b), check) for a, b in zip(bounds[:-1], bounds[1:])]
    if workers == 1:
        parts = [_simulate_chunk(jobs[0])]
    else:
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_simulate_chunk, jobs))
    successes = sum(p[0] for p in parts)
    fids = [f for p in parts for f in p[1]]
    classes: Counter = Counter()
    for p in parts:
        classes.update(p[2])
    return SimulationSummary(
        trials=trials,
        successes=successes,
        min_fidelity=min(fids) if fids else None,
        mean_fidelity=float(np.mean(fids)) if fids else None,
        class_counts=dict(sorted(classes.items())),
    )
