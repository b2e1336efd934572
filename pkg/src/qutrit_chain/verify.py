"""Self-check suite: algebraic identities, oracle equivalence and quoted values.

Each check returns a :class:`Check`; :func:`run_all` runs them in order.
The same functions back ``qutrit-chain verify`` and the acceptance tests.
"""

from __future__ import annotations

import math
import time
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from . import analysis
from .corrections import (
    branch,
    correction_unitary,
    gctp_recovery,
    pairing_table,
    single_step_recovery,
)
from .measurement import _basis_matrix
from .protocols import ProtocolKind, ProtocolSpec, enumerate_outcomes, simulate
from .qutrit_core import (
    ALGEBRA_TOL,
    ChannelCoeffs,
    fidelity,
    haar_random_state,
    make_channel,
    random_channel,
)

ORACLE_TOL = 1e-10
SEED = 20240901


@dataclass
class Check:
    name: str
    passed: bool
    measured: Any
    expected: Any
    tolerance: Any
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"[{'PASS' if self.passed else 'FAIL'}] {self.name}: measured={self.measured} expected={self.expected} tol={self.tolerance}"


def _random_pairs(n: int, seed: int) -> list[tuple[Any, ChannelCoeffs]]:
    rng = np.random.default_rng(seed)
    return [(haar_random_state(seed + 1000 + i), random_channel(rng)) for i in range(n)]


def check_single_step(n: int = 100) -> Check:
    t0 = time.perf_counter()
    worst = 0.0
    for psi, ch in _random_pairs(n, SEED):
        d = enumerate_outcomes(ProtocolSpec(ProtocolKind.SCTP, steps=1), psi, ch)
        worst = max(worst, abs(d.total_success_probability - 3 * ch.a0**2))
    elapsed = time.perf_counter() - t0
    return Check(
        "1 single-step success = 3a0^2",
        worst <= ORACLE_TOL and elapsed < 1.0,
        {"max_abs_error": worst, "runtime_s": elapsed},
        "3a0^2",
        {"abs": ORACLE_TOL, "runtime_s": 1.0},
    )


def check_sctp3(n: int = 100) -> Check:
    spec = ProtocolSpec(ProtocolKind.SCTP, steps=3)
    worst = 0.0
    for psi, ch in _random_pairs(n, SEED + 1):
        d = enumerate_outcomes(spec, psi, ch)
        worst = max(worst, abs(d.total_success_probability - 27 * ch.a0**6))
    ch = make_channel(0.5, 0.6, math.sqrt(0.39))
    at_half = enumerate_outcomes(spec, haar_random_state(SEED), ch).total_success_probability
    ok = worst <= ORACLE_TOL and abs(at_half - 0.421875) <= ORACLE_TOL
    return Check(
        "2 SCTP 3-hop success = 27a0^6",
        ok,
        {"max_abs_error": worst, "a0=0.5": at_half},
        {"formula": "27a0^6", "a0=0.5": 0.421875},
        ORACLE_TOL,
    )


def check_gctp4_classes(n: int = 100) -> Check:
    spec = ProtocolSpec(ProtocolKind.GCTP4)
    worst_class = worst_total = worst_mass = 0.0
    branches = {True: 0, False: 0}
    for psi, ch in _random_pairs(n, SEED + 2):
        d = enumerate_outcomes(spec, psi, ch)
        closed = analysis.gctp4_class_probabilities(ch, psi)
        for cls, p in closed.items():
            worst_class = max(worst_class, abs(d.class_probabilities.get(cls, 0.0) - p))
        worst_mass = max(worst_mass, abs(sum(d.class_probabilities.values()) - 1.0), abs(d.total_probability - 1.0))
        worst_total = max(worst_total, abs(d.total_success_probability - analysis.p_gctp4(ch)))
        branches[branch(ch).primed] += 1
    ok = max(worst_class, worst_total, worst_mass) <= ORACLE_TOL and all(branches.values())
    return Check(
        "3 GCTP4 class probabilities and P_G(4)",
        ok,
        {"class_err": worst_class, "total_err": worst_total, "mass_err": worst_mass, "primed": branches[True], "double_primed": branches[False]},
        "closed-form p'_1..p'_10, P_G(4), both branches hit",
        ORACLE_TOL,
    )


def check_envelopes(points: int = 64) -> Check:
    worst = 0.0
    grid = analysis.default_grid(points=points)
    for i, a0 in enumerate(grid):
        for env, formula in (("min", analysis.p_gctp4_min), ("max", analysis.p_gctp4_max)):
            ch = analysis.envelope_channel(a0, env)
            worst = max(worst, abs(analysis.p_gctp4(ch) - formula(a0)))
            if i % 8 == 7:
                d = enumerate_outcomes(ProtocolSpec(ProtocolKind.GCTP4), haar_random_state(i), ch)
                worst = max(worst, abs(d.total_success_probability - formula(a0)))
    return Check("4 GCTP4 min/max envelopes", worst <= ORACLE_TOL, worst, "6a0^4+9a0^6 / 1.5a0^2+6a0^4-4.5a0^6", ORACLE_TOL)


def check_quoted_values() -> Check:
    ch_max = analysis.envelope_channel(0.5, "max")
    p_s = analysis.p_sctp(ch_max, 15)
    p_pg = analysis.p_pgctp(ch_max, 5)
    ok = 0.013 <= p_s <= 0.014 and 0.14 <= p_pg <= 0.15
    ok = ok and abs(p_s - 0.75**15) <= 1e-15 and abs(p_pg - 0.6796875**5) <= 1e-12
    return Check(
        "5 quoted values at a0=0.5, N=5",
        ok,
        {"p_s": p_s, "p_pg_max": p_pg},
        {"p_s": [0.013, 0.014], "p_pg_max": [0.14, 0.15], "exact": [0.75**15, 0.6796875**5]},
        "bracket",
    )


def check_identities() -> Check:
    b = _basis_matrix()
    errs = {
        "gbm_orthonormal": float(np.max(np.abs(b @ b.conj().T - np.eye(9)))),
        "gbm_complete": float(np.max(np.abs(b.T @ b.conj() - np.eye(9)))),
        "unitaries": max(
            float(np.max(np.abs(u.conj().T @ u - np.eye(3))))
            for u in (correction_unitary(m, n).entries for m in range(3) for n in range(3))
        ),
    }
    pairing_table()  # raises if a table unitary cannot be paired
    kraus_err = 0.0
    rng = np.random.default_rng(SEED + 6)
    channels = [random_channel(rng) for _ in range(50)]
    channels += [make_channel(0.5, 0.5, math.sqrt(0.5)), make_channel(0.5, 0.6, math.sqrt(0.39))]
    for ch in channels:
        pairs = [single_step_recovery(ch, f) for f in range(3)]
        pairs += [gctp_recovery(ch, c) for c in range(1, 11)]
        kraus_err = max(kraus_err, *(p.completeness_error for p in pairs))
    errs["kraus_complete"] = kraus_err
    worst = max(errs.values())
    return Check("6 algebraic identities", worst <= ALGEBRA_TOL, errs, 0.0, ALGEBRA_TOL)


def check_unit_fidelity(target_successes: int = 10_000) -> Check:
    specs = [
        ProtocolSpec(ProtocolKind.SCTP, steps=3),
        ProtocolSpec(ProtocolKind.GCTP4),
        ProtocolSpec(ProtocolKind.PGCTP, segments=2),
    ]
    ch = make_channel(0.5, 0.6, math.sqrt(0.39))
    per_spec = math.ceil(target_successes / len(specs))
    successes, worst = 0, 1.0
    for k, spec in enumerate(specs):
        psi = haar_random_state(SEED + 70 + k)
        p = analysis.p_sctp(ch, 3) if spec.kind is ProtocolKind.SCTP else analysis.p_pgctp(ch, spec.segments)
        trials = math.ceil(per_spec / p * 1.1)
        s = simulate(spec, psi, ch, trials, SEED + 7 * k)
        successes += s.successes
        if s.min_fidelity is not None:
            worst = min(worst, s.min_fidelity)
    ok = successes >= target_successes and worst >= 1 - 1e-9
    return Check("7 unit fidelity of successes", ok, {"successes": successes, "min_fidelity": worst}, 1.0, 1e-9)


def check_dominance(n: int = 1000) -> Check:
    rng = np.random.default_rng(SEED + 8)
    worst = math.inf
    for _ in range(n):
        ch = random_channel(rng)
        worst = min(worst, analysis.p_gctp4(ch) - analysis.p_sctp(ch, 3))
        for segs in (1, 2, 5, 10):
            worst = min(worst, analysis.p_pgctp(ch, segs) - analysis.p_sctp(ch, 3 * segs))
    return Check("8 GCTP/PGCTP dominate SCTP", worst >= -1e-12, {"min_margin": worst}, ">= 0", 1e-12)


MC_CONFIGS: list[tuple[ProtocolSpec, tuple[float, float, float]]] = [
    (ProtocolSpec(ProtocolKind.SCTP, steps=3), (0.5, 0.6, math.sqrt(0.39))),
    (ProtocolSpec(ProtocolKind.GCTP4), (0.5, 0.5, math.sqrt(0.5))),
    (ProtocolSpec(ProtocolKind.PGCTP, segments=2), (0.45, 0.6, math.sqrt(1 - 0.45**2 - 0.36))),
]


def check_monte_carlo(trials: int = 100_000) -> Check:
    t0 = time.perf_counter()
    rows = []
    ok = True
    for k, (spec, coeffs) in enumerate(MC_CONFIGS):
        ch = make_channel(*coeffs)
        psi = haar_random_state(SEED + 90 + k)
        exact = enumerate_outcomes(spec, psi, ch).total_success_probability
        sigma = math.sqrt(max(exact * (1 - exact), 0.0) / trials)
        for attempt in range(2):
            s = simulate(spec, psi, ch, trials, SEED + 1_000_003 * (k + 1) + attempt * 7_919_000)
            z = (s.frequency - exact) / sigma if sigma > 0 else 0.0
            if abs(z) <= 3:
                break
        rows.append({"protocol": spec.kind.value, "exact": exact, "frequency": s.frequency, "z": z, "reseeded": attempt == 1})
        ok = ok and abs(z) <= 3
    elapsed = time.perf_counter() - t0
    return Check(
        "9 Monte Carlo within 3 sigma",
        ok and elapsed < 30.0,
        {"configs": rows, "runtime_s": elapsed},
        "exact enumeration",
        {"sigma": 3, "runtime_s": 30.0},
    )


def check_state_independence() -> Check:
    rng = np.random.default_rng(SEED + 10)
    specs = [
        ProtocolSpec(ProtocolKind.SCTP, steps=1),
        ProtocolSpec(ProtocolKind.SCTP, steps=3),
        ProtocolSpec(ProtocolKind.GCTP4),
        ProtocolSpec(ProtocolKind.PGCTP, segments=2),
    ]
    worst = 0.0
    for c in range(5):
        ch = random_channel(rng)
        for spec in specs:
            values = [enumerate_outcomes(spec, haar_random_state(SEED + 100 * c + i), ch).total_success_probability for i in range(3)]
            worst = max(worst, max(values) - min(values))
    return Check("10 success independent of input state", worst <= ORACLE_TOL, worst, 0.0, ORACLE_TOL)


CHECKS: list[Callable[[], Check]] = [
    check_single_step,
    check_sctp3,
    check_gctp4_classes,
    check_envelopes,
    check_quoted_values,
    check_identities,
    check_unit_fidelity,
    check_dominance,
    check_monte_carlo,
    check_state_independence,
]


def run_all() -> list[Check]:
    return [check() for check in CHECKS]


def summary(checks: list[Check]) -> dict:
    return {
        "schema_version": 1,
        "passed": all(c.passed for c in checks),
        "checks": [asdict(c) for c in checks],
    }
