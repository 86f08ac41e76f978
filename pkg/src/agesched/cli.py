"""Command-line front end: ``agesched {solve,verify,trace,gen}``.

Exit codes: 0 ok, 1 unreadable input or usage error, 2 infeasible
instance, 3 solver/oracle mismatch.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import oracle, single_hop, two_hop
from .model import (
    InfeasibleInstanceError,
    SingleHopInstance,
    TwoHopInstance,
    age_trace_single_hop,
    age_trace_two_hop,
    check_schedule,
    check_two_hop_schedule,
    integrate_age,
    objective_single_hop,
    objective_two_hop,
    t_from_x,
)

EXIT_OK, EXIT_PARSE, EXIT_INFEASIBLE, EXIT_MISMATCH = 0, 1, 2, 3

_FIELDS = {
    "single_hop": {"type", "arrivals", "delay", "session_time"},
    "two_hop": {"type", "source_arrivals", "relay_arrivals", "source_delay",
                "relay_delay", "session_time"},
}


class InstanceFormatError(ValueError):
    pass


def _number(value, key):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise InstanceFormatError(f"{key!r} must be a finite number")
    return float(value)


def _numbers(value, key):
    if not isinstance(value, list):
        raise InstanceFormatError(f"{key!r} must be an array of numbers")
    return [_number(v, key) for v in value]


def parse_instance(data) -> SingleHopInstance | TwoHopInstance:
    """Build an instance from a decoded instance file, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise InstanceFormatError("instance file must hold a JSON object")
    kind = data.get("type")
    if kind not in _FIELDS:
        raise InstanceFormatError(f"'type' must be one of {sorted(_FIELDS)}, got {kind!r}")
    keys = set(data)
    if keys - _FIELDS[kind]:
        raise InstanceFormatError(f"unknown field(s): {sorted(keys - _FIELDS[kind])}")
    if _FIELDS[kind] - keys:
        raise InstanceFormatError(f"missing field(s): {sorted(_FIELDS[kind] - keys)}")
    try:
        if kind == "single_hop":
            return SingleHopInstance(_numbers(data["arrivals"], "arrivals"),
                                     _number(data["delay"], "delay"),
                                     _number(data["session_time"], "session_time"))
        return TwoHopInstance(_numbers(data["source_arrivals"], "source_arrivals"),
                              _numbers(data["relay_arrivals"], "relay_arrivals"),
                              _number(data["source_delay"], "source_delay"),
                              _number(data["relay_delay"], "relay_delay"),
                              _number(data["session_time"], "session_time"))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InstanceFormatError):
            raise
        raise InstanceFormatError(str(exc)) from exc


def load_instance(path) -> SingleHopInstance | TwoHopInstance:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InstanceFormatError(f"cannot read {path}: {exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"{path}: {exc}") from exc
    return parse_instance(data)


def instance_to_dict(inst) -> dict:
    if isinstance(inst, SingleHopInstance):
        return {"type": "single_hop", "arrivals": inst.arrivals.tolist(),
                "delay": inst.delay, "session_time": inst.horizon}
    return {"type": "two_hop", "source_arrivals": inst.source_arrivals.tolist(),
            "relay_arrivals": inst.relay_arrivals.tolist(),
            "source_delay": inst.source_delay, "relay_delay": inst.relay_delay,
            "session_time": inst.horizon}


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def _write(text: str, output):
    if output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(output).write_text(text)


def solve_instance(inst):
    """Solve and cross-check feasibility independently of the solver.

    Returns ``(solution dict, trace)``. A feasibility failure here is a bug,
    so it raises ``RuntimeError`` instead of returning an exit code.
    """
    if isinstance(inst, SingleHopInstance):
        report = single_hop.solve(inst)
        t = t_from_x(report.x_star).t
        problems = check_schedule(t, inst)
        trace = age_trace_single_hop(t, inst.delay, inst.horizon)
        objective = objective_single_hop(t, inst.delay, inst.horizon)
        t_bar = None
    else:
        sched, report = two_hop.solve_two_hop(inst)
        t, t_bar = sched.t, sched.t_bar
        problems = check_two_hop_schedule(sched, inst)
        trace = age_trace_two_hop(sched, inst)
        objective = objective_two_hop(sched, inst)
    if problems:
        raise RuntimeError(f"solver produced an infeasible schedule: {problems}")
    solution = {"x": report.x_star.x.tolist(), "t": t.tolist()}
    if t_bar is not None:
        solution["t_bar"] = t_bar.tolist()
    solution.update(objective=objective, total_age=integrate_age(trace),
                    branch=report.branch.value, n0=report.n0)
    return solution, trace


def _fmt(v) -> str:
    return "-" if v is None else repr(float(v))


def solution_table(sol: dict) -> str:
    two = "t_bar" in sol
    lines = ["i\tx\tt" + ("\tt_bar" if two else "")]
    n = len(sol["t"])
    for i, xi in enumerate(sol["x"]):
        row = [str(i + 1), _fmt(xi), _fmt(sol["t"][i] if i < n else None)]
        if two:
            row.append(_fmt(sol["t_bar"][i] if i < n else None))
        lines.append("\t".join(row))
    lines.append(f"# objective={_fmt(sol['objective'])}")
    lines.append(f"# total_age={_fmt(sol['total_age'])}")
    lines.append(f"# branch={sol['branch']}")
    lines.append(f"# n0={'-' if sol['n0'] is None else sol['n0']}")
    return "\n".join(lines) + "\n"


def trace_table(trace) -> str:
    lines = ["time\tage"]
    lines += [f"{_fmt(time)}\t{_fmt(age)}" for time, age in trace.rows()]
    lines.append(f"# total_age={_fmt(integrate_age(trace))}")
    return "\n".join(lines) + "\n"


def _infeasible(exc: InfeasibleInstanceError) -> int:
    print(exc.report.message, file=sys.stderr)
    return EXIT_INFEASIBLE


def cmd_solve(args) -> int:
    inst = load_instance(args.input)
    try:
        sol, _ = solve_instance(inst)
    except InfeasibleInstanceError as exc:
        return _infeasible(exc)
    _write(_dumps(sol) if args.format == "structured" else solution_table(sol), args.output)
    return EXIT_OK


def cmd_trace(args) -> int:
    inst = load_instance(args.input)
    try:
        _, trace = solve_instance(inst)
    except InfeasibleInstanceError as exc:
        return _infeasible(exc)
    _write(trace_table(trace), args.output)
    return EXIT_OK


def verify_instance(inst, tol: float, xtol: float, out=None) -> int:
    out = out or sys.stdout
    bound = oracle.MAX_SINGLE_HOP_N if isinstance(inst, SingleHopInstance) else oracle.MAX_TWO_HOP_N
    if inst.n > bound:
        print(f"refusing: oracle enumeration is limited to N <= {bound} "
              f"for this instance type, got N={inst.n}", file=sys.stderr)
        return EXIT_PARSE
    try:
        if isinstance(inst, SingleHopInstance):
            report = single_hop.solve(inst)
            x_ref, obj_ref, _ = oracle.qp_solve(inst)
            obj = float(np.sum(report.x_star.x ** 2))
        else:
            sched, report = two_hop.solve_two_hop(inst)
            obj = objective_two_hop(sched, inst)
            *_, obj_ref, _ = oracle.qp_solve_two_hop(inst)
            x_ref, _, _ = oracle.qp_solve(two_hop.reduce(inst).shifted)
    except InfeasibleInstanceError as exc:
        return _infeasible(exc)
    x = report.x_star.x
    obj_gap = abs(obj - obj_ref) / max(1.0, abs(obj_ref))
    x_gap = float(np.max(np.abs(x - x_ref)))
    print(f"solver objective {obj!r}  oracle objective {obj_ref!r}  rel gap {obj_gap:.3g}", file=out)
    print(f"solver x {x.tolist()}", file=out)
    print(f"oracle x {x_ref.tolist()}  max gap {x_gap:.3g}", file=out)
    ok = obj_gap <= tol and x_gap <= xtol
    print("match" if ok else "MISMATCH", file=out)
    return EXIT_OK if ok else EXIT_MISMATCH


def cmd_verify(args) -> int:
    path = Path(args.input)
    files = sorted(path.glob("*.json")) if path.is_dir() else [path]
    worst = EXIT_OK
    for f in files:
        if len(files) > 1:
            print(f"== {f}")
        try:
            inst = load_instance(f)
        except InstanceFormatError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            worst = max(worst, EXIT_PARSE)
            continue
        worst = max(worst, verify_instance(inst, args.tol, args.xtol))
    return worst


def cmd_gen(args) -> int:
    inst = oracle.random_instance(args.seed, args.n, kind=args.type)
    _write(_dumps(instance_to_dict(inst)), args.output)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_PARSE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="agesched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="compute the age-optimal schedule")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None, help="defaults to stdout")
    p.add_argument("--format", choices=("structured", "table"), default="structured")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("verify", help="compare the solver against the brute-force oracle")
    p.add_argument("--input", required=True, help="instance file or directory of *.json")
    p.add_argument("--tol", type=float, default=1e-7, help="relative objective tolerance")
    p.add_argument("--xtol", type=float, default=1e-6, help="componentwise gap tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("trace", help="write the optimal age curve as (time, age) rows")
    p.add_argument("--input", required=True)
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("gen", help="write a random feasible instance")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=_positive_int, required=True)
    p.add_argument("--type", choices=("single_hop", "two_hop"), default="single_hop")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except InstanceFormatError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE


def run():
    sys.exit(main())


if __name__ == "__main__":
    run()
