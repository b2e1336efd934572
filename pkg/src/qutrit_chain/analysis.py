"""Closed-form success probabilities and the envelope sweeps behind them."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np

from .qutrit_core import ChannelCoeffs, PureState, make_channel

Envelope = Literal["min", "max"]
A0_MAX = 1 / math.sqrt(3)
DEFAULT_POINTS = 256
HIGH_A0_MIN = 0.5


class GridOutOfRange(ValueError):
    pass


@dataclass(frozen=True)
class SweepPoint:
    a0: float
    envelope: Envelope
    n_segments: int
    p_s: float
    p_pg: float
    ratio: Optional[float]


def p_single(channel: ChannelCoeffs) -> float:
    return min(3 * channel.a0**2, 1.0)


def p_sctp(channel: ChannelCoeffs, steps: int) -> float:
    return p_single(channel) ** steps


def p_gctp4(channel: ChannelCoeffs) -> float:
    a0, a1, a2 = channel.coeffs
    p = (
        3 * a0**6
        + 9 * a0**4 * a1**2
        + 9 * min(a0**4 * a2**2, a1**4 * a0**2)
        + 6 * a0**2 * a1**2 * a2**2
    )
    return min(p, 1.0)


def p_gctp4_min(a0: float) -> float:
    """Lowest GCTP4 probability at fixed ``a0`` (reached at ``a1 = a0``)."""
    return 6 * a0**4 + 9 * a0**6


def p_gctp4_max(a0: float) -> float:
    """Highest GCTP4 probability at fixed ``a0`` (reached at ``a1 = a2``)."""
    return 1.5 * a0**2 + 6 * a0**4 - 4.5 * a0**6


def p_pgctp(channel: ChannelCoeffs, segments: int) -> float:
    return p_gctp4(channel) ** segments


def envelope_channel(a0: float, envelope: Envelope) -> ChannelCoeffs:
    """The ``a1 = a0`` (min) or ``a1 = a2`` (max) channel with smallest coefficient ``a0``."""
    if not 0.0 <= a0 <= A0_MAX + 1e-15:
        raise GridOutOfRange(f"a0={a0!r} outside (0, 1/sqrt(3)]")
    a0 = min(a0, A0_MAX)
    if envelope == "min":
        a1 = a0
        a2 = math.sqrt(max(1 - 2 * a0**2, 0.0))
    elif envelope == "max":
        a1 = a2 = math.sqrt((1 - a0**2) / 2)
    else:
        raise ValueError(f"unknown envelope {envelope!r}")
    # rounding at a0 = 1/sqrt(3) can break the ordering by an ulp
    a2 = max(a2, a0)
    a1 = min(max(a1, a0), a2)
    return make_channel(a0, a1, a2)


def default_grid(lo: float = 0.0, hi: float = A0_MAX, points: int = DEFAULT_POINTS) -> list[float]:
    """Uniform grid on ``(lo, hi]``; ``lo`` itself is dropped when it is 0."""
    grid = np.linspace(lo, hi, points + 1 if lo == 0.0 else points)
    if lo == 0.0:
        grid = grid[1:]
    grid[-1] = hi
    return [float(x) for x in grid]


def sweep(n_segments: int, a0_grid: list[float], high_a0_only: bool = False) -> list[SweepPoint]:
    """Both envelope rows per grid point, comparing ``3N`` SCTP hops with ``N`` PGCTP segments.

    ``high_a0_only`` restricts the grid to ``a0 >= 0.5``.
    """
    if n_segments < 1:
        raise ValueError("n_segments must be positive")
    points = []
    for a0 in a0_grid:
        if not 0.0 < a0 <= A0_MAX + 1e-15 or (high_a0_only and a0 < HIGH_A0_MIN):
            raise GridOutOfRange(f"a0={a0!r} outside the sweep domain")
        for env in ("min", "max"):
            ch = envelope_channel(a0, env)
            p_s = p_sctp(ch, 3 * n_segments)
            p_pg = p_pgctp(ch, n_segments)
            points.append(SweepPoint(a0, env, n_segments, p_s, p_pg, p_pg / p_s if p_s > 0 else None))
    return points


def gctp4_class_probabilities(channel: ChannelCoeffs, state: PureState) -> dict[int, float]:
    """Probability of each three-hop collapse class, term by term in closed form."""
    a0, a1, a2 = channel.coeffs
    x, y, z = (float(abs(c) ** 2) for c in state.amps)
    return {
        1: a0**6 * x + a1**6 * y + a2**6 * z,
        2: a1**6 * x + a2**6 * y + a0**6 * z,
        3: a2**6 * x + a0**6 * y + a1**6 * z,
        4: 3 * (a0**4 * a1**2 * x + a1**4 * a2**2 * y + a2**4 * a0**2 * z),
        5: 3 * (a1**4 * a2**2 * x + a2**4 * a0**2 * y + a0**4 * a1**2 * z),
        6: 3 * (a2**4 * a0**2 * x + a0**4 * a1**2 * y + a1**4 * a2**2 * z),
        7: 3 * (a0**4 * a2**2 * x + a1**4 * a0**2 * y + a2**4 * a1**2 * z),
        8: 3 * (a1**4 * a0**2 * x + a2**4 * a1**2 * y + a0**4 * a2**2 * z),
        9: 3 * (a2**4 * a1**2 * x + a0**4 * a2**2 * y + a1**4 * a0**2 * z),
        10: 6 * a0**2 * a1**2 * a2**2,
    }


def family_probabilities(channel: ChannelCoeffs, state: PureState) -> dict[int, float]:
    """One-hop family probabilities ``p1, p2, p3`` keyed 1..3."""
    a0, a1, a2 = channel.coeffs
    x, y, z = (float(abs(c) ** 2) for c in state.amps)
    return {
        1: a0**2 * x + a1**2 * y + a2**2 * z,
        2: a1**2 * x + a2**2 * y + a0**2 * z,
        3: a2**2 * x + a0**2 * y + a1**2 * z,
    }
