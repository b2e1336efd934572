"""Correction unitaries and recovery Kraus operators.

The nine reference unitaries ``U_mn`` are stored as a fixed table.  Which one
undoes a given GBM outcome is *derived* by :func:`pairing_table`, which tries
every table entry and its adjoint against brute-force collapse states, because
the table subscripts do not index outcomes directly (``U_10`` shifts
``|k> -> |k+1>`` while outcome ``m=1`` needs ``|k+1> -> |k>``).
"""

from __future__ import annotations

import contextlib
import math
from collections.abc import Iterator
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple

import numpy as np

from .measurement import ALL_OUTCOMES, GbmOutcome, KrausPair, gbm_collapse
from .qutrit_core import (
    ALGEBRA_TOL,
    DIM,
    ChannelCoeffs,
    PureState,
    QutritError,
    QutritOperator,
    make_channel,
    make_state,
    tensor,
)

_W1 = np.exp(-2j * np.pi / 3)  # e^{-2 pi i/3}
_W2 = np.exp(-4j * np.pi / 3)  # e^{-4 pi i/3}

_U_TABLE = {
    (0, 0): [[1, 0, 0], [0, 1, 0], [0, 0, 1]],
    (0, 1): [[1, 0, 0], [0, _W1, 0], [0, 0, _W2]],
    (0, 2): [[1, 0, 0], [0, _W2, 0], [0, 0, _W1]],
    (1, 0): [[0, 0, 1], [1, 0, 0], [0, 1, 0]],
    (1, 1): [[0, 0, _W2], [1, 0, 0], [0, _W1, 0]],
    (1, 2): [[0, 0, _W1], [1, 0, 0], [0, _W2, 0]],
    (2, 0): [[0, 1, 0], [0, 0, 1], [1, 0, 0]],
    (2, 1): [[0, _W1, 0], [0, 0, _W2], [1, 0, 0]],
    (2, 2): [[0, _W2, 0], [0, 0, _W1], [1, 0, 0]],
}

# generic probe for the pairing search: unequal, nonzero amplitudes everywhere
_PROBE_STATE = (0.6 + 0.1j, -0.3 + 0.5j, 0.2 - 0.4j)
_PROBE_CHANNEL = (0.3, 0.5, math.sqrt(1 - 0.34))


class DegenerateChannel(QutritError):
    pass


class NoValidPairing(RuntimeError):
    pass


class CollapseClass(int):
    """Label 1..10 of the amplitude pattern left after three uncorrected hops."""

    def __new__(cls, index: int) -> CollapseClass:
        if not 1 <= index <= 10:
            raise ValueError(f"collapse class must be in 1..10, got {index}")
        return super().__new__(cls, index)


@dataclass(frozen=True)
class BranchSelector:
    primed: bool


class Pairing(NamedTuple):
    label: tuple[int, int]
    adjoint: bool
    operator: QutritOperator


_fault = False


@contextlib.contextmanager
def injected_fault() -> Iterator[None]:
    """Flip the sign of one success-operator entry (negative control for ``verify``)."""
    global _fault
    prev, _fault = _fault, True
    try:
        yield
    finally:
        _fault = prev


def correction_unitary(m: int, n: int) -> QutritOperator:
    return QutritOperator(np.array(_U_TABLE[(m, n)], dtype=np.complex128))


def canonical_family(state: PureState, channel: ChannelCoeffs, m: int) -> np.ndarray:
    """Unnormalized ``sum_j c_j a_{j+m} |j>``."""
    a = channel.coeffs
    return np.array([state.amps[j] * a[(j + m) % DIM] for j in range(DIM)])


@lru_cache(maxsize=1)
def pairing_table() -> dict[GbmOutcome, Pairing]:
    """Map each GBM outcome to the table unitary (or adjoint) that canonicalizes it.

    An exact match is preferred.  If only a match up to a global phase exists,
    the phase is folded into the returned operator so the corrected state
    carries no residual phase.
    """
    psi = make_state(*_PROBE_STATE)
    channel = make_channel(*_PROBE_CHANNEL)
    register = tensor(psi, channel.state)
    candidates = [(k, False) for k in _U_TABLE] + [(k, True) for k in _U_TABLE]
    table: dict[GbmOutcome, Pairing] = {}
    for outcome in ALL_OUTCOMES:
        residual = gbm_collapse(register, (0, 1), outcome).post_state.amps
        target = canonical_family(psi, channel, outcome.m)
        target = target / np.linalg.norm(target)
        fallback = None
        for key, adj in candidates:
            u = correction_unitary(*key)
            if adj:
                u = u.dagger
            out = u.entries @ residual
            if np.max(np.abs(out - target)) <= ALGEBRA_TOL:
                table[outcome] = Pairing(key, adj, u)
                break
            overlap = np.vdot(target, out)
            if fallback is None and abs(abs(overlap) - 1.0) <= ALGEBRA_TOL:
                phase = overlap / abs(overlap)
                fallback = Pairing(key, adj, QutritOperator(u.entries / phase))
        else:
            if fallback is None:
                raise NoValidPairing(f"no table unitary canonicalizes outcome {tuple(outcome)}")
            table[outcome] = fallback
    return table


def resolve_correction(outcome: GbmOutcome) -> QutritOperator:
    return pairing_table()[GbmOutcome(*outcome)].operator


def _require_nondegenerate(channel: ChannelCoeffs) -> None:
    if channel.a0 <= 0.0:
        raise DegenerateChannel("a0 = 0: recovery ratios are undefined")


def _pair_from_success(diag: list[float]) -> KrausPair:
    # E_F is the unique nonnegative diagonal completing the pair
    s = np.array(diag, dtype=float)
    f = np.sqrt(np.clip(1.0 - s * s, 0.0, None))
    if _fault:
        s = s.copy()
        s[-1] = -s[-1]
    return KrausPair(QutritOperator.diag(s), QutritOperator.diag(f))


def single_step_recovery(channel: ChannelCoeffs, family: int) -> KrausPair:
    """Recovery pair for the one-hop family ``m = family``."""
    _require_nondegenerate(channel)
    a0, a1, a2 = channel.coeffs
    table = {
        0: [1.0, a0 / a1, a0 / a2],
        1: [a0 / a1, a0 / a2, 1.0],
        2: [a0 / a2, 1.0, a0 / a1],
    }
    return _pair_from_success(table[family])


def branch(channel: ChannelCoeffs) -> BranchSelector:
    """Primed operators apply when ``a0^2 a2 <= a1^2 a0`` (ties go primed)."""
    return BranchSelector(primed=channel.a0 * channel.a2 <= channel.a1**2 + ALGEBRA_TOL)


IDENTITY_PASS = KrausPair(QutritOperator.identity(), QutritOperator.zero())


def gctp_recovery(channel: ChannelCoeffs, cls: int) -> KrausPair:
    """Recovery pair for collapse class ``cls``; class 10 gets :data:`IDENTITY_PASS`."""
    cls = CollapseClass(cls)
    if cls == 10:
        return IDENTITY_PASS
    _require_nondegenerate(channel)
    a0, a1, a2 = channel.coeffs
    r_cube1, r_cube2 = (a0 / a1) ** 3, (a0 / a2) ** 3
    x, y = a0**2 / (a1 * a2), a0 * a1 / a2**2
    if cls <= 6:
        table = {
            1: [1.0, r_cube1, r_cube2],
            2: [r_cube1, r_cube2, 1.0],
            3: [r_cube2, 1.0, r_cube1],
            4: [1.0, x, y],
            5: [x, y, 1.0],
            6: [y, 1.0, x],
        }
    elif branch(channel).primed:
        z = a0 * a2 / a1**2
        table = {
            7: [1.0, z, x],
            8: [z, x, 1.0],
            9: [x, 1.0, z],
        }
    else:
        z = a1**2 / (a0 * a2)
        table = {
            7: [z, 1.0, y],
            8: [1.0, y, z],
            9: [y, z, 1.0],
        }
    return _pair_from_success(table[cls])


# multiset of per-hop families -> collapse class
_CLASS_OF_MULTISET = {
    (0, 0, 0): 1,
    (1, 1, 1): 2,
    (2, 2, 2): 3,
    (0, 0, 1): 4,
    (1, 1, 2): 5,
    (0, 2, 2): 6,
    (0, 0, 2): 7,
    (0, 1, 1): 8,
    (1, 2, 2): 9,
    (0, 1, 2): 10,
}


def classify_collapse(m1: int, m2: int, m3: int) -> CollapseClass:
    return CollapseClass(_CLASS_OF_MULTISET[tuple(sorted((m1, m2, m3)))])


def class_pattern(channel: ChannelCoeffs, cls: int) -> tuple[float, float, float]:
    """Amplitude multipliers ``(b0, b1, b2)`` of ``|phi_cls>``."""
    a0, a1, a2 = channel.coeffs
    patterns = {
        1: (a0**3, a1**3, a2**3),
        2: (a1**3, a2**3, a0**3),
        3: (a2**3, a0**3, a1**3),
        4: (a0**2 * a1, a1**2 * a2, a2**2 * a0),
        5: (a1**2 * a2, a2**2 * a0, a0**2 * a1),
        6: (a2**2 * a0, a0**2 * a1, a1**2 * a2),
        7: (a0**2 * a2, a1**2 * a0, a2**2 * a1),
        8: (a1**2 * a0, a2**2 * a1, a0**2 * a2),
        9: (a2**2 * a1, a0**2 * a2, a1**2 * a0),
        10: (1.0, 1.0, 1.0),
    }
    return patterns[CollapseClass(cls)]
