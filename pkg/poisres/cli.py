import argparse
import json
import math
import sys
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
import pandas as pd

from poisres import __version__
from poisres.core.characteristic import OdeTrace, characteristic_ode_family
from poisres.core.errors import PoisresError, ProblemError
from poisres.core.event_log import EventLog
from poisres.core.parser import parse
from poisres.core.report import Report
from poisres.core.settings import Settings
from poisres.core.verdicts import ObstructionStatus, OverallStatus
from poisres.runner.catalog import example_document, example_names
from poisres.runner.orchestrator import (
    VerificationRun,
    default_events_filename,
    examples_summary,
    run_example,
)
from poisres.runner.problem import load_problem

EXIT_INPUT_ERROR = 3

VERIFY_EXIT = {
    OverallStatus.VERIFIED.value: 0,
    OverallStatus.REFUTED.value: 1,
    OverallStatus.INCONCLUSIVE.value: 2,
}


def check_exit_code(status: str) -> int:
    return 1 if ObstructionStatus(status).obstructed else 0


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="RNG seed (default 42)")
    parser.add_argument("--samples", type=int, default=None, help="Morphism samples per piece")
    parser.add_argument("--tol", type=float, default=None, help="Identity tolerance")
    parser.add_argument(
        "--grid", type=int, nargs="+", default=None, help="Coverage grid points per axis"
    )
    parser.add_argument(
        "--no-jacobi", action="store_true", help="Skip the Jacobi check of every structure"
    )
    parser.add_argument("--format", choices=["text", "json"], default="text", help="Output format")
    parser.add_argument(
        "--events",
        type=str,
        nargs="?",
        const="",
        default=None,
        metavar="FILE",
        help="Export the event log as JSON Lines",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="poisres",
        description="poisres: verify Poisson structures and symplectic resolution candidates",
    )
    parser.add_argument("--version", action="version", version=f"poisres {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p_check = sub.add_parser("check", help="Jacobi, singular locus and obstruction verdict of a target")
    p_check.add_argument("file", help="Problem file (JSON)")
    _add_run_flags(p_check)

    p_verify = sub.add_parser("verify", help="Verify a symplectic resolution candidate")
    p_verify.add_argument("file", help="Problem file (JSON) with pieces")
    _add_run_flags(p_verify)

    p_ode = sub.add_parser("ode", help="Trace du/dp = f(u, v0) with fixed-step RK4")
    p_ode.add_argument("--f", dest="f", required=True, help="Right-hand side f(x, y)")
    p_ode.add_argument("--v0", type=float, nargs="+", default=[0.0], help="Values of y along the line")
    p_ode.add_argument("--u0", type=float, nargs="+", default=[0.0], help="Initial values of x")
    p_ode.add_argument("--span", type=float, nargs=2, default=[0.0, 10.0], metavar=("P0", "P1"))
    p_ode.add_argument("--step", type=float, default=None, help="RK4 step (default 1e-3)")
    p_ode.add_argument("--blowup", type=float, default=None, help="Blow-up bound on |u| (default 1e9)")
    p_ode.add_argument("--rows", type=int, default=11, help="Table rows per trajectory")
    p_ode.add_argument("--format", choices=["text", "json"], default="text", help="Output format")

    p_ex = sub.add_parser("examples", help="Run bundled examples against their expected outcomes")
    p_ex.add_argument("names", nargs="*", help=f"Subset of: {', '.join(example_names())}")
    p_ex.add_argument("--n", type=int, default=None, help="Exponent n of the powers example")
    p_ex.add_argument("--m", type=int, default=None, help="Exponent m of the powers example")
    p_ex.add_argument("--g", type=str, default=None, help="Factor g of the linear example")
    p_ex.add_argument("--dump", type=str, default=None, metavar="NAME", help="Print one example's problem file")
    _add_run_flags(p_ex)

    return parser


def overrides_from_args(args: argparse.Namespace) -> Dict[str, Any]:
    out: Dict[str, Any] = {
        "seed": args.seed,
        "samples": args.samples,
        "tol": args.tol,
        "grid": tuple(args.grid) if args.grid else None,
    }
    if args.no_jacobi:
        out["check_jacobi"] = False
    return out


def _emit_report(report: Report, fmt: str) -> None:
    sys.stdout.write(report.to_json() if fmt == "json" else report.to_text())


def _export_events(log: EventLog, target: Optional[str]) -> None:
    if target is None:
        return
    filename = target or default_events_filename()
    with open(filename, "w", encoding="utf-8") as f:
        f.write(log.export_jsonl() + "\n")
    print(f"events written to {filename}", file=sys.stderr)


# ----------------------------
# Commands
# ----------------------------

def cmd_check(args: argparse.Namespace) -> int:
    log = EventLog()
    run = VerificationRun(load_problem(args.file), overrides=overrides_from_args(args), log=log)
    report = run.check()
    _emit_report(report, args.format)
    _export_events(log, args.events)
    return check_exit_code(report.status)


def cmd_verify(args: argparse.Namespace) -> int:
    log = EventLog()
    run = VerificationRun(load_problem(args.file), overrides=overrides_from_args(args), log=log)
    report = run.verify()
    _emit_report(report, args.format)
    _export_events(log, args.events)
    return VERIFY_EXIT[report.status]


def _trace_table(trace: OdeTrace, rows: int) -> pd.DataFrame:
    idx = np.unique(np.linspace(0, trace.p.size - 1, max(2, rows)).round().astype(int))
    return pd.DataFrame({"p": trace.p[idx], "u": trace.u[idx]})


def cmd_ode(args: argparse.Namespace) -> int:
    s = Settings().merged(overrides={"ode_step": args.step, "blowup": args.blowup})
    if not all(math.isfinite(p) for p in args.span):
        raise ProblemError("span must be finite", path="--span")
    if len(args.v0) != len(args.u0) and 1 not in (len(args.v0), len(args.u0)):
        raise ProblemError(
            f"{len(args.v0)} values of --v0 cannot pair with {len(args.u0)} values of --u0",
            path="--u0",
        )
    f = parse(args.f)
    traces = characteristic_ode_family(
        f,
        args.v0,
        args.u0,
        p_span=(args.span[0], args.span[1]),
        step=s.ode_step,
        blowup=s.blowup,
    )
    if args.format == "json":
        body = []
        for t in traces:
            d = t.to_dict()
            table = _trace_table(t, args.rows)
            d["table"] = [[float(p), float(u)] for p, u in zip(table["p"], table["u"])]
            body.append(d)
        sys.stdout.write(json.dumps({"f": str(f), "traces": body}, indent=2, sort_keys=True) + "\n")
    else:
        for t in traces:
            state = "blow-up" if t.blew_up else ("undefined" if t.truncated else "ok")
            stop = t.blowup_p if t.blew_up else t.truncated_p
            head = f"v0={t.v0:g} u0={t.u0:g} state={state} max|u|={t.max_abs_u:.6g}"
            if stop is not None:
                head += f" at p={stop:.6g}"
            print(head)
            print(_trace_table(t, args.rows).to_string(index=False))
            print()
    return 1 if any(t.blew_up or t.truncated for t in traces) else 0


def cmd_examples(args: argparse.Namespace) -> int:
    params = {"n": args.n, "m": args.m, "g": args.g}
    if args.dump:
        sys.stdout.write(json.dumps(example_document(args.dump, params), indent=2, sort_keys=True) + "\n")
        return 0

    names: List[str] = args.names or example_names()
    overrides = overrides_from_args(args)
    # Flag errors abort the command; per-example input errors are outcomes.
    Settings().merged(overrides=overrides)
    log = EventLog()
    outcomes = [run_example(n, params, overrides, log) for n in names]
    summary = examples_summary(outcomes)
    if args.format == "json":
        sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    else:
        table = pd.DataFrame(
            [
                {
                    "example": o.name,
                    "command": o.command,
                    "expected": o.expected,
                    "actual": o.actual,
                    "match": "yes" if o.matched else "NO",
                }
                for o in outcomes
            ]
        )
        print(table.to_string(index=False))
    _export_events(log, args.events)
    return 0 if summary["all_matched"] else 1


COMMANDS = {
    "check": cmd_check,
    "verify": cmd_verify,
    "ode": cmd_ode,
    "examples": cmd_examples,
}


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except PoisresError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT_ERROR


if __name__ == "__main__":
    sys.exit(main())
