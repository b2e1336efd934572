"""Probabilistic chain teleportation of a qutrit over partially entangled channels."""

from __future__ import annotations

from .analysis import p_gctp4, p_gctp4_max, p_gctp4_min, p_pgctp, p_sctp, sweep
from .protocols import (
    ProtocolKind,
    ProtocolSpec,
    enumerate_outcomes,
    run_gctp4,
    run_pgctp,
    run_sctp,
    run_trial,
    simulate,
)
from .qutrit_core import (
    ChannelCoeffs,
    PureState,
    QutritOperator,
    fidelity,
    haar_random_state,
    make_channel,
    make_state,
)

__all__ = [
    "ChannelCoeffs",
    "ProtocolKind",
    "ProtocolSpec",
    "PureState",
    "QutritOperator",
    "enumerate_outcomes",
    "fidelity",
    "haar_random_state",
    "make_channel",
    "make_state",
    "p_gctp4",
    "p_gctp4_max",
    "p_gctp4_min",
    "p_pgctp",
    "p_sctp",
    "run_gctp4",
    "run_pgctp",
    "run_sctp",
    "run_trial",
    "simulate",
    "sweep",
]
