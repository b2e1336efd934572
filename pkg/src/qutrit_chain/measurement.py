"""Generalized Bell-basis measurement and two-outcome Kraus measurements."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache
from typing import NamedTuple, Protocol, Union

import numpy as np
from numpy.typing import NDArray

from .qutrit_core import (
    ALGEBRA_TOL,
    DIM,
    INPUT_TOL,
    IndexOutOfRange,
    PureState,
    QutritError,
    QutritOperator,
    apply_to_vector,
)

MIN_PROBABILITY = 1e-15
OMEGA = np.exp(2j * np.pi / DIM)


class DuplicateIndex(QutritError):
    pass


class ZeroProbabilityOutcome(QutritError):
    pass


class IncompleteKraus(QutritError):
    pass


class RandomSource(Protocol):
    def random(self) -> float: ...


class GbmOutcome(NamedTuple):
    m: int
    n: int


ALL_OUTCOMES: tuple[GbmOutcome, ...] = tuple(GbmOutcome(m, n) for m in range(DIM) for n in range(DIM))


@dataclass(frozen=True)
class KrausPair:
    e_success: QutritOperator
    e_failure: QutritOperator

    @cached_property
    def completeness_error(self) -> float:
        s, f = self.e_success.entries, self.e_failure.entries
        return float(np.max(np.abs(s.conj().T @ s + f.conj().T @ f - np.eye(DIM))))


@dataclass(frozen=True)
class MeasurementRecord:
    outcome: Union[GbmOutcome, bool]
    probability: float
    post_state: PureState


@lru_cache(maxsize=None)
def _basis_matrix() -> NDArray[np.complex128]:
    # row 3m+n holds |Phi_mn> = 3^-1/2 sum_j w^{jn} |j>|j+m>
    b = np.zeros((DIM * DIM, DIM * DIM), dtype=np.complex128)
    for m, n in ALL_OUTCOMES:
        for j in range(DIM):
            b[DIM * m + n, DIM * j + (j + m) % DIM] = OMEGA ** (j * n) / np.sqrt(DIM)
    b.flags.writeable = False
    return b


def gbm_basis() -> list[tuple[GbmOutcome, PureState]]:
    """The nine generalized Bell states, in lexicographic ``(m, n)`` order."""
    b = _basis_matrix()
    return [(o, PureState(2, b[i])) for i, o in enumerate(ALL_OUTCOMES)]


def _check_pair(n_qutrits: int, pair: tuple[int, int]) -> None:
    i, j = pair
    if n_qutrits < 2:
        raise IndexOutOfRange("GBM needs a register of at least two qutrits")
    for k in pair:
        if not 0 <= k < n_qutrits:
            raise IndexOutOfRange(f"qutrit {k} outside a {n_qutrits}-qutrit register")
    if i == j:
        raise DuplicateIndex(f"measured pair repeats qutrit {i}")


def _project_all(register: PureState, pair: tuple[int, int]) -> NDArray[np.complex128]:
    """Unnormalized residuals ``<Phi_mn|_pair |register>``, shape (9, 3**(n-2))."""
    _check_pair(register.n_qutrits, pair)
    n = register.n_qutrits
    rest = [k for k in range(n) if k not in pair]
    t = register.amps.reshape((DIM,) * n).transpose([pair[0], pair[1], *rest])
    return _basis_matrix().conj() @ t.reshape(DIM * DIM, -1)


def gbm_probabilities(register: PureState, pair: tuple[int, int]) -> dict[GbmOutcome, float]:
    residuals = _project_all(register, pair)
    probs = np.sum(np.abs(residuals) ** 2, axis=1)
    return {o: float(p) for o, p in zip(ALL_OUTCOMES, probs)}


def _residual_state(vec: NDArray[np.complex128], n_left: int) -> PureState:
    if n_left == 0:
        raise IndexOutOfRange("GBM on a two-qutrit register leaves no residual qutrit")
    return PureState._trusted(n_left, vec / np.sqrt(np.vdot(vec, vec).real))


def gbm_collapse(register: PureState, pair: tuple[int, int], outcome: GbmOutcome) -> MeasurementRecord:
    """Project ``pair`` onto ``|Phi_outcome>`` and drop it from the register.

    Remaining qutrits keep their relative order and are relabelled downward.
    """
    residuals = _project_all(register, pair)
    vec = residuals[DIM * outcome.m + outcome.n]
    prob = float(np.vdot(vec, vec).real)
    if prob < MIN_PROBABILITY:
        raise ZeroProbabilityOutcome(f"outcome {tuple(outcome)} has probability {prob:.3e}")
    return MeasurementRecord(outcome, prob, _residual_state(vec, register.n_qutrits - 2))


def sample_gbm(register: PureState, pair: tuple[int, int], rng: RandomSource) -> MeasurementRecord:
    """Draw one GBM outcome by inverse CDF over the lexicographic outcome order."""
    residuals = _project_all(register, pair)
    probs = np.sum(np.abs(residuals) ** 2, axis=1)
    probs[probs < MIN_PROBABILITY] = 0.0
    cdf = np.cumsum(probs)
    chosen = int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))
    # guard against u landing exactly on the top edge
    while chosen >= len(probs) or probs[chosen] == 0.0:
        chosen -= 1
    vec = residuals[chosen]
    return MeasurementRecord(
        ALL_OUTCOMES[chosen], float(probs[chosen]), _residual_state(vec, register.n_qutrits - 2)
    )


def kraus_branches(
    state: PureState, target: int, kraus: KrausPair
) -> tuple[tuple[float, NDArray[np.complex128]], tuple[float, NDArray[np.complex128]]]:
    """Both unnormalized branches ``(probability, E|state>)``, success first."""
    if kraus.completeness_error > INPUT_TOL:
        raise IncompleteKraus(f"E_S^+E_S + E_F^+E_F deviates from I by {kraus.completeness_error:.3e}")
    out = []
    for op in (kraus.e_success, kraus.e_failure):
        vec = apply_to_vector(op.entries, state.amps, state.n_qutrits, target)
        out.append((float(np.vdot(vec, vec).real), vec))
    return out[0], out[1]


def apply_generalized_measurement(
    state: PureState, target: int, kraus: KrausPair, rng: RandomSource
) -> MeasurementRecord:
    """Sample the two-outcome measurement ``kraus`` on qutrit ``target``.

    Returns a record whose ``outcome`` is ``True`` for the success operator.
    """
    (p_s, v_s), (p_f, v_f) = kraus_branches(state, target, kraus)
    success = p_s >= MIN_PROBABILITY and (p_f < MIN_PROBABILITY or rng.random() * (p_s + p_f) < p_s)
    prob, vec = (p_s, v_s) if success else (p_f, v_f)
    return MeasurementRecord(success, prob, PureState._trusted(state.n_qutrits, vec / np.sqrt(prob)))


def is_orthonormal(tol: float = ALGEBRA_TOL) -> bool:
    b = _basis_matrix()
    return bool(np.allclose(b @ b.conj().T, np.eye(DIM * DIM), rtol=0, atol=tol))
