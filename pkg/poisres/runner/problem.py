"""
Problem files: JSON documents describing a target structure and,
optionally, a resolution candidate.

    {
      "name": "squares",
      "target": {"coords": ["x", "y"], "box": [[-2, 2], [-2, 2]],
                 "brackets": {"x,y": "x^2 + y^2"}},
      "pieces": [{"name": "sigma", "coords": ["p", "q"], "box": [[-16, 16], [-3, 3]],
                  "brackets": {"p,q": "1"},
                  "map": {"x": "q*sin(p*q)", "y": "q*cos(p*q)"},
                  "probes": [{"p": 0.5, "q": 1.0}]}],
      "options": {"seed": 42, "samples": 10000, "tol": 1e-9, "grid": [21, 21]}
    }

Bracket keys name two coordinates of the same chart; omitted pairs are 0.
Every failure is reported as ProblemError with the path of the offending
field.
"""

import json
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional, Tuple, Union

import jsonschema

from poisres.core.chart import Chart
from poisres.core.errors import DimensionError, ExprSyntaxError, PoisresError, ProblemError
from poisres.core.expr import Expr
from poisres.core.morphism import SmoothMap
from poisres.core.parser import parse
from poisres.core.poisson import JacobiVerdict, PoissonStructure, verify_jacobi
from poisres.core.resolution import ResolutionCandidate, ResolutionPiece
from poisres.core.settings import Settings
from poisres.core.utils import stable_hash

_EXPR = {"type": ["string", "number"]}

_CHART_PROPERTIES: Dict[str, Any] = {
    "coords": {
        "type": "array",
        "items": {"type": "string", "pattern": "^[A-Za-z_][A-Za-z0-9_]*$"},
        "minItems": 1,
        "uniqueItems": True,
    },
    "box": {
        "type": "array",
        "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "minItems": 1,
    },
    "brackets": {
        "type": "object",
        "patternProperties": {r"^\s*[A-Za-z_][A-Za-z0-9_]*\s*,\s*[A-Za-z_][A-Za-z0-9_]*\s*$": _EXPR},
        "additionalProperties": False,
    },
}

PROBLEM_SCHEMA: Dict[str, Any] = {
    "$schema": "http://json-schema.org/draft-07/schema#",
    "title": "poisres problem file",
    "type": "object",
    "required": ["target"],
    "additionalProperties": False,
    "properties": {
        "name": {"type": "string"},
        "description": {"type": "string"},
        "target": {
            "type": "object",
            "required": ["coords", "box"],
            "additionalProperties": False,
            "properties": dict(_CHART_PROPERTIES),
        },
        "pieces": {
            "type": "array",
            "minItems": 1,
            "items": {
                "type": "object",
                "required": ["name", "coords", "box", "map"],
                "additionalProperties": False,
                "properties": {
                    "name": {"type": "string", "minLength": 1},
                    **_CHART_PROPERTIES,
                    "map": {"type": "object", "additionalProperties": _EXPR},
                    "probes": {
                        "type": "array",
                        "items": {"type": "object", "additionalProperties": {"type": "number"}},
                    },
                },
            },
        },
        "options": {"type": "object"},
    },
}


@dataclass(frozen=True)
class Problem:
    """
    A validated problem file.

    Invariants:
    - document passed PROBLEM_SCHEMA
    - pieces is empty only when the file carries no candidate
    """
    name: str
    target: PoissonStructure
    pieces: Tuple[ResolutionPiece, ...] = ()
    options: Dict[str, Any] = field(default_factory=dict)
    document: Dict[str, Any] = field(default_factory=dict)

    @property
    def has_candidate(self) -> bool:
        return bool(self.pieces)

    @property
    def digest(self) -> str:
        return stable_hash(self.document)

    def candidate(self) -> ResolutionCandidate:
        if not self.pieces:
            raise ProblemError("verification needs at least one piece", path="pieces")
        try:
            return ResolutionCandidate(target=self.target, pieces=self.pieces)
        except (DimensionError, ValueError) as exc:
            raise ProblemError(str(exc), path="pieces") from exc

    def settings(self, overrides: Optional[Dict[str, Any]] = None) -> Settings:
        return Settings().merged(self.options, overrides)


# ----------------------------
# Validation and construction
# ----------------------------

def _json_path(parts: Iterable[Union[str, int]]) -> str:
    out = ""
    for part in parts:
        if isinstance(part, int):
            out += f"[{part}]"
        else:
            out += f".{part}" if out else str(part)
    return out or "<document>"


def validate_document(doc: Any) -> None:
    """Schema check; the first error (by path) becomes a ProblemError."""
    validator = jsonschema.Draft7Validator(PROBLEM_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: [str(p) for p in e.absolute_path])
    if errors:
        err = errors[0]
        raise ProblemError(err.message, path=_json_path(err.absolute_path))


def _expr(value: Union[str, float, int], path: str) -> Expr:
    text = value if isinstance(value, str) else repr(float(value))
    try:
        return parse(text)
    except ExprSyntaxError as exc:
        raise ProblemError(f"{exc} in {text!r}", path=path) from exc


def _chart(section: Dict[str, Any], path: str) -> Chart:
    try:
        return Chart(tuple(section["coords"]), tuple(tuple(iv) for iv in section["box"]))
    except (DimensionError, ValueError) as exc:
        raise ProblemError(str(exc), path=f"{path}.box") from exc


def _structure(section: Dict[str, Any], chart: Chart, path: str) -> PoissonStructure:
    brackets = {}
    for key, value in section.get("brackets", {}).items():
        a, b = (part.strip() for part in key.split(","))
        brackets[(a, b)] = _expr(value, f"{path}.brackets.{key}")
    try:
        return PoissonStructure.from_brackets(chart, brackets)
    except PoisresError as exc:
        raise ProblemError(str(exc), path=f"{path}.brackets") from exc


def _piece(section: Dict[str, Any], target: Chart, path: str) -> ResolutionPiece:
    chart = _chart(section, path)
    structure = _structure(section, chart, path)
    mapping = {name: _expr(v, f"{path}.map.{name}") for name, v in section["map"].items()}
    try:
        smooth = SmoothMap.from_mapping(chart, target, mapping)
    except PoisresError as exc:
        raise ProblemError(str(exc), path=f"{path}.map") from exc

    probes = []
    for k, probe in enumerate(section.get("probes", [])):
        if set(probe) != set(chart.coords):
            raise ProblemError(
                f"probe must give every coordinate of {', '.join(chart.coords)}",
                path=f"{path}.probes[{k}]",
            )
        probes.append({name: float(probe[name]) for name in chart.coords})
    return ResolutionPiece(section["name"], structure, smooth, tuple(probes))


def problem_from_dict(doc: Dict[str, Any]) -> Problem:
    validate_document(doc)
    target_chart = _chart(doc["target"], "target")
    target = _structure(doc["target"], target_chart, "target")
    pieces = tuple(
        _piece(section, target_chart, f"pieces[{k}]") for k, section in enumerate(doc.get("pieces", []))
    )
    names = [p.name for p in pieces]
    if len(set(names)) != len(names):
        raise ProblemError(f"piece names must be distinct: {names}", path="pieces")
    options = dict(doc.get("options", {}))
    # fail early on unknown or malformed options
    Settings().merged(options)
    return Problem(
        name=str(doc.get("name", "")),
        target=target,
        pieces=pieces,
        options=options,
        document=doc,
    )


def load_problem(path: str) -> Problem:
    try:
        with open(path, "r", encoding="utf-8") as f:
            doc = json.load(f)
    except OSError as exc:
        raise ProblemError(f"cannot read problem file: {exc.strerror}", path=path) from exc
    except json.JSONDecodeError as exc:
        raise ProblemError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", path=path) from exc
    return problem_from_dict(doc)


def check_problem_jacobi(problem: Problem, settings: Settings) -> List[Tuple[str, JacobiVerdict]]:
    """
    Jacobi check of every structure in the file, run before any other work.

    Raises ProblemError naming the first structure that fails.
    """
    structures = [("target", "target", problem.target)] + [
        (p.name, f"pieces[{k}]", p.structure) for k, p in enumerate(problem.pieces)
    ]
    out = []
    for label, path, P in structures:
        verdict = verify_jacobi(P, n_samples=settings.jacobi_samples, tol=settings.tol, seed=settings.seed)
        if not verdict.passed:
            triple = ", ".join(verdict.triple or ())
            raise ProblemError(
                f"bracket fails the Jacobi identity on ({triple}), gap {verdict.worst_gap:.3g}",
                path=f"{path}.brackets",
            )
        out.append((label, verdict))
    return out
