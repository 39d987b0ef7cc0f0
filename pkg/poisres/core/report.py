import json
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import pandas as pd

from .utils import json_float, json_point
from .verdicts import CITATIONS, CheckVerdict


@dataclass(frozen=True)
class CheckResult:
    name: str
    verdict: CheckVerdict
    residual: Optional[float] = None
    witness: Optional[Dict[str, float]] = None
    citation: Optional[str] = None  # key of CITATIONS
    detail: Dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> bool:
        return self.verdict is CheckVerdict.FAIL

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "verdict": self.verdict.value,
            "residual": json_float(self.residual),
            "witness": json_point(self.witness),
            "citation": CITATIONS[self.citation] if self.citation else None,
            "detail": self.detail,
        }


@dataclass
class Report:
    """
    Machine-readable verification report.

    Invariants:
    - Byte-identical JSON for identical input, settings and seed
    - Carries no wall-clock data (event logs are exported separately)
    """
    version: str
    command: str
    status: str
    input_digest: str
    config_hash: str
    checks: List[CheckResult] = field(default_factory=list)
    coverage: Optional[dict] = None
    locus: Optional[dict] = None
    obstruction: Optional[dict] = None
    notes: List[str] = field(default_factory=list)

    def check(self, name: str) -> CheckResult:
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "command": self.command,
            "status": self.status,
            "input_digest": self.input_digest,
            "config_hash": self.config_hash,
            "checks": [c.to_dict() for c in self.checks],
            "coverage": self.coverage,
            "locus": self.locus,
            "obstruction": self.obstruction,
            "notes": list(self.notes),
        }

    def to_json(self, indent: int = 2) -> str:
        return json.dumps(self.to_dict(), indent=indent, sort_keys=True) + "\n"

    def checks_table(self) -> pd.DataFrame:
        rows = []
        for c in self.checks:
            rows.append(
                {
                    "check": c.name,
                    "verdict": c.verdict.value,
                    "residual": "" if c.residual is None else f"{c.residual:.3g}",
                    "witness": ""
                    if c.witness is None
                    else ", ".join(f"{k}={v:.6g}" for k, v in c.witness.items()),
                }
            )
        return pd.DataFrame(rows, columns=["check", "verdict", "residual", "witness"])

    def to_text(self) -> str:
        lines = [
            f"poisres {self.version}  {self.command}  status={self.status}",
            f"input={self.input_digest[:16]}  config={self.config_hash[:16]}",
            "",
        ]
        if self.checks:
            lines.append(self.checks_table().to_string(index=False))
            lines.append("")
        if self.coverage is not None:
            lines.append(
                f"coverage: {self.coverage['covered_fraction']} "
                f"({self.coverage['covered']}/{self.coverage['total']} grid points)"
            )
        if self.locus is not None:
            lines.append(f"locus: {self.locus['kind']}")
        if self.obstruction is not None:
            lines.append(f"obstruction: {self.obstruction['status']}")
            for cite in self.obstruction["citations"]:
                lines.append(f"  cites: {cite['statement']}")
        if self.notes:
            lines.append("notes:")
            lines.extend(f"  - {n}" for n in self.notes)
        return "\n".join(lines) + "\n"
