"""Command-line front end: ``simulate``, ``enumerate``, ``sweep`` and ``verify``.

Exit codes: 0 success, 1 internal assertion or failed verification,
2 invalid input.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from contextlib import nullcontext
from typing import Optional, Sequence

from . import analysis, verify
from .corrections import injected_fault
from .protocols import ProtocolKind, ProtocolSpec, enumerate_outcomes, simulate
from .qutrit_core import (
    ChannelCoeffs,
    PureState,
    QutritError,
    haar_random_state,
    make_channel,
    make_state,
)

SCHEMA_VERSION = 1
SWEEP_COLUMNS = ("a0", "envelope", "n_segments", "p_s", "p_pg", "ratio")


class UsageError(Exception):
    pass


def _fmt(x: Optional[float]) -> str:
    return "" if x is None else f"{x:.17g}"


def parse_channel(args: argparse.Namespace) -> ChannelCoeffs:
    if args.a0 is None:
        raise UsageError("--a0 is required")
    if args.envelope is not None:
        if args.a1 is not None or args.a2 is not None:
            raise UsageError("--envelope cannot be combined with --a1/--a2")
        return analysis.envelope_channel(args.a0, args.envelope)
    if args.a1 is None or args.a2 is None:
        raise UsageError("give --a1 and --a2 (or --envelope min|max)")
    a2 = math.sqrt(max(1 - args.a0**2 - args.a1**2, 0.0)) if args.a2 == "auto" else float(args.a2)
    return make_channel(args.a0, args.a1, a2)


def parse_state(text: str, seed: int) -> PureState:
    """``random`` (Haar, from ``seed``), three complex amplitudes, or six reals (re,im pairs)."""
    if text == "random":
        return haar_random_state(seed)
    parts = [p.strip().replace(" ", "") for p in text.split(",")]
    try:
        if len(parts) == 3:
            amps = [complex(p) for p in parts]
        elif len(parts) == 6:
            v = [float(p) for p in parts]
            amps = [complex(v[0], v[1]), complex(v[2], v[3]), complex(v[4], v[5])]
        else:
            raise UsageError("--state takes 3 complex amplitudes, 6 reals, or 'random'")
    except ValueError as exc:
        raise UsageError(f"bad --state value: {exc}") from exc
    return make_state(*amps)


def parse_spec(args: argparse.Namespace) -> ProtocolSpec:
    return ProtocolSpec(ProtocolKind(args.protocol), segments=args.segments, steps=args.steps)


def _exact(spec: ProtocolSpec, channel: ChannelCoeffs) -> float:
    if spec.kind is ProtocolKind.SCTP:
        return analysis.p_sctp(channel, spec.steps)
    return analysis.p_pgctp(channel, spec.n_segments)


def _channel_dict(ch: ChannelCoeffs) -> dict:
    return {"a0": ch.a0, "a1": ch.a1, "a2": ch.a2}


def _state_list(st: PureState) -> list[list[float]]:
    return [[float(c.real), float(c.imag)] for c in st.amps]


def _emit_table(rows: list[dict], fmt: str, payload: dict) -> str:
    if fmt == "json":
        return json.dumps(payload, indent=2, sort_keys=False) + "\n"
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: (_fmt(v) if isinstance(v, float) else v) for k, v in row.items()})
    return buf.getvalue()


def cmd_simulate(args: argparse.Namespace) -> str:
    spec = parse_spec(args)
    channel = parse_channel(args)
    state = parse_state(args.state, args.seed)
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    s = simulate(spec, state, channel, args.trials, args.seed, workers=args.workers, check=True)
    exact = enumerate_outcomes(spec, state, channel).total_success_probability if spec.hops <= 15 else _exact(spec, channel)
    sigma = math.sqrt(max(exact * (1 - exact), 0.0) / s.trials)
    z = (s.frequency - exact) / sigma if sigma > 0 else 0.0
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "simulate",
        "protocol": spec.kind.value,
        "steps": spec.steps,
        "segments": spec.segments,
        "channel": _channel_dict(channel),
        "state": _state_list(state),
        "seed": args.seed,
        "trials": s.trials,
        "successes": s.successes,
        "frequency": s.frequency,
        "exact_probability": exact,
        "z_score": z,
        "min_fidelity": s.min_fidelity,
        "mean_fidelity": s.mean_fidelity,
        "class_counts": {str(k): v for k, v in s.class_counts.items()},
    }
    rows = [{k: v for k, v in payload.items() if not isinstance(v, (dict, list))}]
    return _emit_table(rows, args.format, payload)


def cmd_enumerate(args: argparse.Namespace) -> str:
    spec = parse_spec(args)
    channel = parse_channel(args)
    state = parse_state(args.state, args.seed)
    dist = enumerate_outcomes(spec, state, channel)
    label = "family" if spec.kind is ProtocolKind.SCTP else "class"
    rows = [{label: k, "probability": p} for k, p in sorted(dist.class_probabilities.items())]
    rows.append({label: "total_success", "probability": dist.total_success_probability})
    payload = {
        "schema_version": SCHEMA_VERSION,
        "command": "enumerate",
        "protocol": spec.kind.value,
        "steps": spec.steps,
        "segments": spec.segments,
        "channel": _channel_dict(channel),
        "state": _state_list(state),
        f"{label}_probabilities": {str(k): p for k, p in sorted(dist.class_probabilities.items())},
        "total_probability": dist.total_probability,
        "total_success_probability": dist.total_success_probability,
        "leaves": len(dist.entries),
    }
    return _emit_table(rows, args.format, payload)


def cmd_sweep(args: argparse.Namespace) -> str:
    lo = analysis.HIGH_A0_MIN if args.high_a0 else args.a0_min
    grid = analysis.default_grid(lo, args.a0_max, args.points)
    points = analysis.sweep(args.segments, grid, high_a0_only=args.high_a0)
    rows = [
        {"a0": p.a0, "envelope": p.envelope, "n_segments": p.n_segments, "p_s": p.p_s, "p_pg": p.p_pg, "ratio": p.ratio}
        for p in points
    ]
    if args.format == "json":
        return json.dumps({"schema_version": SCHEMA_VERSION, "command": "sweep", "rows": rows}, indent=2) + "\n"
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        writer.writerow([_fmt(r["a0"]), r["envelope"], r["n_segments"], _fmt(r["p_s"]), _fmt(r["p_pg"]), _fmt(r["ratio"])])
    return buf.getvalue()


def cmd_verify(args: argparse.Namespace) -> tuple[str, bool]:
    with injected_fault() if args.inject_fault else nullcontext():
        checks = verify.run_all()
    for c in checks:
        print(c.line(), file=sys.stderr)
    report = verify.summary(checks)
    return json.dumps(report, indent=2, default=str) + "\n", report["passed"]


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", choices=[k.value for k in ProtocolKind], required=True)
    p.add_argument("--steps", type=int, default=1, help="SCTP hops")
    p.add_argument("--segments", type=int, default=1, help="PGCTP segments of three hops")
    p.add_argument("--a0", type=float)
    p.add_argument("--a1", type=float)
    p.add_argument("--a2", help="a float or 'auto' for sqrt(1-a0^2-a1^2)")
    p.add_argument("--envelope", choices=["min", "max"], help="use the a1=a0 (min) or a1=a2 (max) channel")
    p.add_argument("--state", default="random", help="'a,b,c' (complex ok, e.g. 1,1j,0), six reals, or 'random'")
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qutrit-chain", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo trials")
    _add_common(p)
    p.add_argument("--trials", type=int, default=10_000)
    p.add_argument("--workers", type=int, default=1)

    p = sub.add_parser("enumerate", help="exact outcome-tree probabilities")
    _add_common(p)

    p = sub.add_parser("sweep", help="closed-form envelope sweep (CSV)")
    p.add_argument("--segments", type=int, required=True, help="N: PGCTP segments (SCTP uses 3N hops)")
    p.add_argument("--a0-min", type=float, default=0.0)
    p.add_argument("--a0-max", type=float, default=analysis.A0_MAX)
    p.add_argument("--points", type=int, default=analysis.DEFAULT_POINTS)
    p.add_argument("--high-a0", action="store_true", help="restrict a0 to [0.5, 1/sqrt(3)]")

    p = sub.add_parser("verify", help="run the self-check suite")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)

    for name in ("simulate", "enumerate", "sweep", "verify"):
        sp = sub.choices[name]
        sp.add_argument("--format", choices=["csv", "json"], default="csv" if name == "sweep" else "json")
        sp.add_argument("--output", "-o", help="write here instead of stdout")
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    ok = True
    try:
        if args.command == "simulate":
            text = cmd_simulate(args)
        elif args.command == "enumerate":
            text = cmd_enumerate(args)
        elif args.command == "sweep":
            text = cmd_sweep(args)
        else:
            text, ok = cmd_verify(args)
    except (UsageError, QutritError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AssertionError as exc:
        print(f"internal assertion failed: {exc}", file=sys.stderr)
        return 1
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
