import json
from dataclasses import dataclass
from datetime import datetime
from typing import Any, Dict, List, Optional, Tuple

from poisres import __version__
from poisres.core.errors import PoisresError
from poisres.core.event_log import EventLog
from poisres.core.obstruction import obstruction_verdict
from poisres.core.report import CheckResult, Report
from poisres.core.resolution import verify_resolution
from poisres.core.settings import Settings
from poisres.core.utils import json_float, stable_hash
from poisres.core.verdicts import CheckVerdict, LocusKind, ObstructionStatus
from poisres.runner.catalog import INPUT_ERROR, example_document, get_example
from poisres.runner.problem import Problem, check_problem_jacobi, problem_from_dict


class VerificationRun:
    """
    One deterministic run over one problem.

    Notes:
    - Settings precedence: defaults < problem options < overrides
    - All randomness is derived from settings.seed inside the core modules
    - The event log is kept beside the report, never inside it
    """

    def __init__(
        self,
        problem: Problem,
        *,
        overrides: Optional[Dict[str, Any]] = None,
        log: Optional[EventLog] = None,
    ) -> None:
        self.problem = problem
        self.settings: Settings = problem.settings(overrides)
        self.log = log if log is not None else EventLog()
        self.last_report: Optional[Report] = None

        self.log.append(
            "run_init",
            {
                "problem": problem.name,
                "input_digest": problem.digest,
                "config_hash": stable_hash(self.settings.to_dict()),
                "pieces": [p.name for p in problem.pieces],
            },
            stage="load",
        )

    @classmethod
    def from_document(cls, doc: Dict[str, Any], **kwargs: Any) -> "VerificationRun":
        return cls(problem_from_dict(doc), **kwargs)

    def _jacobi_checks(self) -> List[CheckResult]:
        if not self.settings.check_jacobi:
            return [CheckResult("jacobi", CheckVerdict.SKIPPED)]
        out = []
        for label, verdict in check_problem_jacobi(self.problem, self.settings):
            out.append(
                CheckResult(
                    f"jacobi:{label}",
                    CheckVerdict.PASS,
                    residual=verdict.worst_gap,
                    detail={"samples": verdict.samples},
                )
            )
            self.log.append("jacobi", {"structure": label, **verdict.to_dict()}, stage="load")
        return out

    def check(self) -> Report:
        """Structure-only analysis of the target: Jacobi, singular locus, obstruction."""
        s = self.settings
        target = self.problem.target
        checks = self._jacobi_checks()
        notes: List[str] = []

        if target.dim % 2:
            notes.append(
                f"odd dimension {target.dim}: no symplectic manifold has this dimension, "
                "so no resolution of the same dimension exists; the locus analysis needs "
                "an even dimension and was not run"
            )
            checks.append(CheckResult("obstruction", CheckVerdict.SKIPPED))
            report = Report(
                version=__version__,
                command="check",
                status=ObstructionStatus.INCONCLUSIVE.value,
                input_digest=self.problem.digest,
                config_hash=stable_hash(s.to_dict()),
                checks=checks,
                notes=notes,
            )
        else:
            ov = obstruction_verdict(target, settings=s, log=self.log)
            checks.append(
                CheckResult(
                    "locus",
                    CheckVerdict.INFO,
                    detail={"kind": ov.locus.kind.value, "zero_points": ov.locus.evidence["zero_points"]},
                )
            )
            checks.append(
                CheckResult(
                    "rank_on_locus",
                    CheckVerdict.INFO,
                    detail={"histogram": {str(k): v for k, v in sorted(ov.rank_histogram.items())}},
                )
            )
            if ov.locus.kind is LocusKind.CODIM_ONE_HYPERSURFACE:
                checks.append(CheckResult("tangency", CheckVerdict.INFO, residual=ov.tangency))
            checks.append(
                CheckResult(
                    "obstruction",
                    CheckVerdict.INFO,
                    citation=ov.citations[0] if ov.citations else None,
                    detail={"status": ov.status.value, "corank_two": ov.corank_two},
                )
            )
            report = Report(
                version=__version__,
                command="check",
                status=ov.status.value,
                input_digest=self.problem.digest,
                config_hash=stable_hash(s.to_dict()),
                checks=checks,
                locus=ov.locus.to_dict(),
                obstruction=ov.to_dict(),
                notes=list(ov.notes),
            )

        self.log.append("verdict", {"command": "check", "status": report.status}, stage="check")
        self.last_report = report
        return report

    def verify(self) -> Report:
        """Full candidate verification; the file must carry pieces."""
        candidate = self.problem.candidate()
        jacobi = check_problem_jacobi(self.problem, self.settings) if self.settings.check_jacobi else None
        report = verify_resolution(candidate, settings=self.settings, log=self.log, jacobi=jacobi)
        # the report digests the file as written, not the parsed candidate
        report.input_digest = self.problem.digest
        self.last_report = report
        return report

    def run(self, command: str) -> Report:
        if command == "check":
            return self.check()
        if command == "verify":
            return self.verify()
        raise ValueError(f"unknown command {command!r}")


# ----------------------------
# Bundled examples
# ----------------------------

@dataclass(frozen=True)
class ExampleOutcome:
    name: str
    command: str
    expected: str
    actual: str
    report: Optional[Report]
    error: Optional[str] = None

    @property
    def matched(self) -> bool:
        return self.expected == self.actual

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "command": self.command,
            "expected": self.expected,
            "actual": self.actual,
            "matched": self.matched,
            "error": self.error,
        }


def run_example(
    name: str,
    params: Optional[Dict[str, Any]] = None,
    overrides: Optional[Dict[str, Any]] = None,
    log: Optional[EventLog] = None,
) -> ExampleOutcome:
    definition = get_example(name)
    doc = example_document(name, params)
    try:
        run = VerificationRun.from_document(doc, overrides=overrides, log=log)
        report = run.run(definition.command)
    except PoisresError as exc:
        return ExampleOutcome(name, definition.command, definition.expected, INPUT_ERROR, None, str(exc))
    return ExampleOutcome(name, definition.command, definition.expected, report.status, report)


def examples_summary(outcomes: List[ExampleOutcome]) -> Dict[str, Any]:
    return {
        "version": __version__,
        "command": "examples",
        "all_matched": all(o.matched for o in outcomes),
        "examples": [o.to_dict() for o in outcomes],
        "coverage": {
            o.name: json_float(o.report.coverage["covered_fraction"])
            for o in outcomes
            if o.report is not None and o.report.coverage is not None
        },
    }


# ----------------------------
# Replay
# ----------------------------

def verify_deterministic_report(
    doc: Dict[str, Any],
    command: str = "verify",
    overrides: Optional[Dict[str, Any]] = None,
) -> Tuple[bool, Dict[str, Any]]:
    """
    Run the same problem twice and compare the report bytes.
    """
    out1 = VerificationRun.from_document(doc, overrides=overrides).run(command).to_json()
    out2 = VerificationRun.from_document(doc, overrides=overrides).run(command).to_json()
    state1 = {"report_hash": stable_hash(json.loads(out1)), "bytes": len(out1)}
    state2 = {"report_hash": stable_hash(json.loads(out2)), "bytes": len(out2)}
    identical = out1 == out2
    return identical, {"run1": state1, "run2": state2}


def default_events_filename(prefix: str = "poisres_events") -> str:
    ts = datetime.utcnow().strftime("%Y%m%d_%H%M%S")
    return f"{prefix}_{ts}.jsonl"
