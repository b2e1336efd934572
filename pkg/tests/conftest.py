from __future__ import annotations

import math

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from qutrit_chain.qutrit_core import make_channel, make_state

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@st.composite
def channels(draw, min_a0: float = 0.05):
    """Ordered, normalized channels: a0 drawn first, then a1 between a0 and its cap."""
    a0 = draw(st.floats(min_value=min_a0, max_value=1 / math.sqrt(3)))
    cap = math.sqrt((1 - a0 * a0) / 2)
    t = draw(st.floats(min_value=0.0, max_value=1.0))
    a1 = min(a0 + t * (cap - a0), cap)
    a2 = math.sqrt(max(1 - a0 * a0 - a1 * a1, 0.0))
    a0, a1, a2 = sorted((a0, a1, a2))  # ulp-level ties near 1/sqrt(3)
    return make_channel(a0, a1, a2)


complex_amp = st.builds(
    complex,
    st.floats(min_value=-1, max_value=1, allow_nan=False),
    st.floats(min_value=-1, max_value=1, allow_nan=False),
)


@st.composite
def states(draw):
    amps = [draw(complex_amp) for _ in range(3)]
    if sum(abs(a) ** 2 for a in amps) < 1e-3:
        amps[0] = 1.0
    return make_state(*amps)


def dense_on(op: np.ndarray, n: int, target: int) -> np.ndarray:
    """Full 3**n matrix of ``op`` acting on one qutrit (kron oracle)."""
    full = np.eye(1)
    for k in range(n):
        full = np.kron(full, op if k == target else np.eye(3))
    return full


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
