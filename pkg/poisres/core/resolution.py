"""
Verification of symplectic-resolution candidates.

A candidate is a finite disjoint union of symplectic pieces, each with a
map into the target chart. It is checked for symplecticity of every piece,
the Poisson-morphism identity on every piece, grid coverage of the target
box (a proxy for surjectivity; true surjectivity is not decidable from
samples) and the consistency of critical points with singular values.
Properness is never checked.
"""

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .. import __version__
from .calculus import simplify
from .chart import GridSpec, grid_points, per_axis, sample_points
from .errors import DimensionError, DomainError, UnknownVariableError
from .event_log import EventLog
from .expr import Expr, Mul, evaluate, evaluate_batch, free_variables
from .locus import scan_singular_locus
from .morphism import (
    SmoothMap,
    critical_scan,
    jacobian_batch,
    morphism_pairs,
    normalized_det_batch,
    pullback,
    verify_morphism,
)
from .obstruction import ObstructionVerdict, obstruction_verdict
from .parser import parse
from .poisson import JacobiVerdict, PoissonStructure, pfaffian_values, rank_values, verify_jacobi
from .report import CheckResult, Report
from .settings import Settings
from .solver import SolverConfig, levenberg_marquardt, nearest_image_starts, source_lattice
from .utils import json_float, json_point, stable_hash
from .verdicts import CheckVerdict, MorphismStatus, ObstructionStatus, OverallStatus


@dataclass(frozen=True)
class ResolutionPiece:
    """
    One connected piece (Sigma_k, Pi_k, phi_k) of a candidate.

    probes are named source points where the morphism gap is reported
    explicitly, in addition to random sampling.
    """
    name: str
    structure: PoissonStructure
    map: SmoothMap
    probes: Tuple[Dict[str, float], ...] = ()

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "structure": self.structure.to_dict(),
            "map": {k: v for k, v in self.map.to_dict()["map"].items()},
            "probes": [json_point(p) for p in self.probes],
        }


@dataclass(frozen=True)
class ResolutionCandidate:
    """
    Invariants:
    - at least one piece
    - every piece has the target's dimension and maps into the target chart
    """
    target: PoissonStructure
    pieces: Tuple[ResolutionPiece, ...]

    def __post_init__(self) -> None:
        pieces = tuple(self.pieces)
        if not pieces:
            raise DimensionError("a candidate needs at least one piece")
        names = [p.name for p in pieces]
        if len(set(names)) != len(names):
            raise ValueError(f"piece names must be distinct: {names}")
        if self.target.dim % 2:
            raise DimensionError(
                f"symplectic pieces need an even dimension, target has {self.target.dim}"
            )
        for p in pieces:
            if p.structure.dim != self.target.dim:
                raise DimensionError(
                    f"piece {p.name} has dimension {p.structure.dim}, target has {self.target.dim}"
                )
            if p.map.source != p.structure.chart or p.map.target != self.target.chart:
                raise DimensionError(f"map of piece {p.name} does not join its chart to the target chart")
        object.__setattr__(self, "pieces", pieces)

    def to_dict(self) -> dict:
        return {
            "target": self.target.to_dict(),
            "pieces": [p.to_dict() for p in self.pieces],
        }


@dataclass(frozen=True)
class SymplecticVerdict:
    passed: bool
    min_abs_pfaffian: float
    witness: Optional[Dict[str, float]]
    samples: int
    locus_zero_points: int

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "min_abs_pfaffian": json_float(self.min_abs_pfaffian),
            "witness": json_point(self.witness),
            "samples": self.samples,
            "locus_zero_points": self.locus_zero_points,
        }


@dataclass(frozen=True)
class CoverageResult:
    """
    Grid coverage of the target box.

    Invariants:
    - covered_fraction == covered / total
    - piece_index[k] == -1 exactly for uncovered grid points
    """
    grid: Tuple[int, ...]
    targets: np.ndarray
    residuals: np.ndarray
    piece_index: np.ndarray
    preimages: np.ndarray
    piece_names: Tuple[str, ...]
    tol: float

    @property
    def total(self) -> int:
        return int(self.targets.shape[0])

    @property
    def covered_mask(self) -> np.ndarray:
        return self.piece_index >= 0

    @property
    def covered(self) -> int:
        return int(np.count_nonzero(self.covered_mask))

    @property
    def covered_fraction(self) -> float:
        return self.covered / self.total if self.total else 0.0

    def uncovered(self, chart_coords: Sequence[str]) -> List[Dict[str, float]]:
        rows = self.targets[~self.covered_mask]
        return [{n: float(v) for n, v in zip(chart_coords, row)} for row in rows]

    def to_dict(self, target_coords: Sequence[str], source_coords: Sequence[Sequence[str]], limit: int = 10) -> dict:
        per_piece = {
            name: int(np.count_nonzero(self.piece_index == k)) for k, name in enumerate(self.piece_names)
        }
        witnesses = []
        for k in np.flatnonzero(self.covered_mask)[:limit]:
            idx = int(self.piece_index[k])
            witnesses.append(
                {
                    "target": json_point({n: float(v) for n, v in zip(target_coords, self.targets[k])}),
                    "piece": self.piece_names[idx],
                    "preimage": json_point(
                        {n: float(v) for n, v in zip(source_coords[idx], self.preimages[k])}
                    ),
                    "residual": json_float(float(self.residuals[k])),
                }
            )
        return {
            "grid": list(self.grid),
            "total": self.total,
            "covered": self.covered,
            "covered_fraction": json_float(self.covered_fraction),
            "solver_tol": json_float(self.tol),
            "per_piece": per_piece,
            "uncovered_count": self.total - self.covered,
            "uncovered": [json_point(p) for p in self.uncovered(target_coords)[:limit]],
            "witnesses": witnesses,
        }


# ----------------------------
# Symplecticity
# ----------------------------

def verify_symplectic(
    P: PoissonStructure,
    n_samples: int = 4096,
    tol: float = 1e-9,
    seed: int = 42,
    grid: Optional[GridSpec] = None,
    refine_tol: float = 1e-10,
    zero_tol: float = 1e-9,
) -> SymplecticVerdict:
    """
    |Pf| > tol at every random sample AND no zero found by a locus scan.

    Random samples alone never land on a zero set of measure zero, so the
    scan of the piece chart is part of the check.
    """
    if P.dim % 2:
        raise DimensionError(f"symplectic check needs an even dimension, chart has {P.dim}")
    rng = np.random.default_rng(seed)
    pts = sample_points(P.chart, n_samples, rng)
    vals = np.abs(pfaffian_values(P, pts))
    defined = np.isfinite(vals)
    pts, vals = pts[defined], vals[defined]

    witness: Optional[Dict[str, float]] = None
    bad = np.flatnonzero(vals <= tol)
    if bad.size:
        witness = P.chart.point(pts[bad[0]])

    grid = grid if grid is not None else Settings().locus_grid_for(P.dim)
    scan = scan_singular_locus(P, grid, refine_tol=refine_tol, zero_tol=zero_tol)
    min_abs = float(vals.min()) if vals.size else math.inf
    if scan.zero_points.shape[0]:
        zvals = np.abs(pfaffian_values(P, scan.zero_points))
        zvals = zvals[np.isfinite(zvals)]
        if zvals.size:
            min_abs = min(min_abs, float(zvals.min()))
        if witness is None:
            witness = P.chart.point(scan.zero_points[0])

    return SymplecticVerdict(
        passed=witness is None,
        min_abs_pfaffian=min_abs,
        witness=witness,
        samples=int(vals.size),
        locus_zero_points=int(scan.zero_points.shape[0]),
    )


# ----------------------------
# Coverage
# ----------------------------

def _solve_piece(
    piece: ResolutionPiece,
    targets: np.ndarray,
    cfg: SolverConfig,
    rng: np.random.Generator,
) -> Tuple[np.ndarray, np.ndarray]:
    """Best residual and preimage per target point over all starts: (K,), (K, d)."""
    m = piece.map
    chart = m.source
    k, d = targets.shape[0], chart.dim
    n_lattice = int(math.ceil(cfg.starts / 2))

    lattice = source_lattice(chart, cfg.lattice_points)
    near = nearest_image_starts(lattice, m.images(lattice), targets, n_lattice)
    uniform = rng.uniform(chart.lower, chart.upper, size=(k, cfg.starts - near.shape[1], d))
    starts = np.concatenate([near, uniform], axis=1)
    s = starts.shape[1]

    goal = np.repeat(targets, s, axis=0)
    x, norm = levenberg_marquardt(
        lambda pts, rows: m.images(pts) - goal[rows],
        lambda pts, rows: jacobian_batch(m, pts),
        starts.reshape(k * s, d),
        chart.lower,
        chart.upper,
        iterations=cfg.iterations,
        tol=cfg.tol,
        tau=cfg.tau,
    )
    norm = np.where(np.isnan(norm), np.inf, norm).reshape(k, s)
    x = x.reshape(k, s, d)
    best = np.argmin(norm, axis=1)
    rows = np.arange(k)
    return norm[rows, best], x[rows, best]


def surjectivity_coverage(
    cand: ResolutionCandidate,
    grid: GridSpec = 21,
    solver: Optional[SolverConfig] = None,
    seed: int = 42,
    log: Optional[EventLog] = None,
) -> CoverageResult:
    """
    Multi-start damped least squares from every piece to every target grid point.

    Piece k draws from default_rng(seed + 1000*k), so appending pieces never
    changes the result for earlier ones and coverage is monotone in the
    piece list.
    """
    cfg = solver or SolverConfig()
    counts = tuple(per_axis(cand.target.chart, grid))
    targets = grid_points(cand.target.chart, counts)
    k = targets.shape[0]
    d = cand.target.dim

    best_res = np.full(k, np.inf)
    best_piece = np.full(k, -1, dtype=int)
    best_pre = np.full((k, d), np.nan)

    for idx, piece in enumerate(cand.pieces):
        rng = np.random.default_rng(seed + 1000 * idx)
        res, pre = _solve_piece(piece, targets, cfg, rng)
        open_ = best_piece < 0
        # an earlier piece that already covers a point keeps it
        claim = open_ & (res < cfg.tol)
        best_res = np.where(open_, np.fmin(best_res, res), best_res)
        best_res[claim] = res[claim]
        best_piece[claim] = idx
        best_pre[claim] = pre[claim]
        if log is not None:
            log.append(
                "coverage_piece",
                {"piece": piece.name, "covered": int(np.count_nonzero(res < cfg.tol)), "total": k},
                stage="coverage",
            )

    return CoverageResult(
        grid=counts,
        targets=targets,
        residuals=best_res,
        piece_index=best_piece,
        preimages=best_pre,
        piece_names=tuple(p.name for p in cand.pieces),
        tol=cfg.tol,
    )


# ----------------------------
# Regular and critical values
# ----------------------------

@dataclass(frozen=True)
class ValueConsistency:
    """
    Critical points versus singular values over the covered grid points.

    regular_*  : preimages of regular target points must have |det J| >= tau
    critical_* : preimages of singular target points must have |det J| < tau
    """
    threshold: float
    regular_checked: int
    regular_failures: int
    regular_witness: Optional[Dict[str, float]]
    regular_worst: float
    critical_checked: int
    critical_failures: int
    critical_witness: Optional[Dict[str, float]]
    critical_worst: float

    def to_dict(self) -> dict:
        return {
            "threshold": json_float(self.threshold),
            "regular": {
                "checked": self.regular_checked,
                "failures": self.regular_failures,
                "min_abs_det": json_float(self.regular_worst),
                "witness": json_point(self.regular_witness),
            },
            "critical": {
                "checked": self.critical_checked,
                "failures": self.critical_failures,
                "max_abs_det": json_float(self.critical_worst),
                "witness": json_point(self.critical_witness),
            },
        }


def value_consistency(
    cand: ResolutionCandidate,
    coverage: CoverageResult,
    threshold: float = 1e-7,
    rank_threshold: float = 1e-8,
) -> ValueConsistency:
    """
    Both directions of the critical-value criterion at every covered grid point.

    A target point is singular when the even rank of pi there is below the
    dimension; |det J| is the row-normalised determinant at the preimage
    the coverage solver found. Witnesses are target points.
    """
    target = cand.target
    covered = np.flatnonzero(coverage.covered_mask)
    ranks = rank_values(target, coverage.targets[covered], rank_threshold) if covered.size else np.zeros(0, int)
    dets = np.full(covered.size, np.nan)
    for idx, piece in enumerate(cand.pieces):
        sel = coverage.piece_index[covered] == idx
        if sel.any():
            dets[sel] = normalized_det_batch(piece.map, coverage.preimages[covered[sel]])
    absdet = np.abs(dets)
    known = (ranks >= 0) & np.isfinite(absdet)

    regular = known & (ranks == target.dim)
    singular = known & (ranks < target.dim)
    reg_bad = regular & (absdet < threshold)
    crit_bad = singular & (absdet >= threshold)

    def _witness(mask: np.ndarray) -> Optional[Dict[str, float]]:
        hits = np.flatnonzero(mask)
        return target.chart.point(coverage.targets[covered[hits[0]]]) if hits.size else None

    return ValueConsistency(
        threshold=threshold,
        regular_checked=int(np.count_nonzero(regular)),
        regular_failures=int(np.count_nonzero(reg_bad)),
        regular_witness=_witness(reg_bad),
        regular_worst=float(absdet[regular].min()) if regular.any() else math.inf,
        critical_checked=int(np.count_nonzero(singular)),
        critical_failures=int(np.count_nonzero(crit_bad)),
        critical_witness=_witness(crit_bad),
        critical_worst=float(absdet[singular].max()) if singular.any() else 0.0,
    )


# ----------------------------
# Positive rescaling
# ----------------------------

def rescaled_candidate(
    cand: ResolutionCandidate,
    kappa: Union[str, Expr],
    grid: GridSpec = 21,
) -> ResolutionCandidate:
    """
    A candidate for kappa * pi from a candidate for pi.

    Every piece bracket is multiplied by phi_k^* kappa; the maps are kept.
    kappa must be positive at every grid node of the target box, otherwise
    DomainError. Positivity between nodes is assumed.
    """
    k = parse(kappa) if isinstance(kappa, str) else kappa
    chart = cand.target.chart
    extra = free_variables(k) - set(chart.coords)
    if extra:
        raise UnknownVariableError(extra, chart.coords)
    nodes = grid_points(chart, grid)
    values = np.broadcast_to(evaluate_batch(k, chart.env(nodes)), (nodes.shape[0],))
    with np.errstate(invalid="ignore"):
        bad = np.flatnonzero(~(values > 0))
    if bad.size:
        where = ", ".join(f"{n}={v:.6g}" for n, v in chart.point(nodes[bad[0]]).items())
        raise DomainError(k, f"rescaling factor is not positive on the target box (at {where})")

    target = PoissonStructure(
        chart, {pair: simplify(Mul(k, e)) for pair, e in cand.target.upper.items()}
    )
    pieces = []
    for piece in cand.pieces:
        pulled = pullback(piece.map, k)
        structure = PoissonStructure(
            piece.structure.chart,
            {pair: simplify(Mul(pulled, e)) for pair, e in piece.structure.upper.items()},
        )
        pieces.append(replace(piece, structure=structure))
    return ResolutionCandidate(target=target, pieces=tuple(pieces))


# ----------------------------
# Aggregate verification
# ----------------------------

def _probe_check(
    piece: ResolutionPiece, target: PoissonStructure, point: Mapping[str, float], k: int, tol: float
) -> CheckResult:
    name = f"probe:{piece.name}[{k}]"
    worst = 0.0
    passed = True
    pair_at: Optional[Tuple[str, str]] = None
    try:
        for names, lhs, rhs in morphism_pairs(piece.structure, target, piece.map):
            a, b = evaluate(lhs, point), evaluate(rhs, point)
            gap = abs(a - b)
            if gap > worst:
                worst, pair_at = gap, names
            if gap > tol * (1.0 + abs(b)):
                passed = False
    except DomainError as exc:
        return CheckResult(
            name, CheckVerdict.FAIL, witness=dict(point), citation="morphism_criterion",
            detail={"error": exc.reason},
        )
    return CheckResult(
        name,
        CheckVerdict.PASS if passed else CheckVerdict.FAIL,
        residual=worst,
        witness=dict(point),
        citation="morphism_criterion",
        detail={"pair": list(pair_at) if pair_at else None},
    )


def _critical_check(piece: ResolutionPiece, target: PoissonStructure, s: Settings) -> CheckResult:
    """Critical points of the piece map; their images should be singular values of the target."""
    scan = critical_scan(
        piece.map,
        grid=s.critical_grid_for(piece.structure.dim),
        threshold=s.critical_threshold,
        refine_tol=s.refine_tol,
    )
    coords = target.chart.coords
    imgs = np.array([[img[c] for c in coords] for img in scan.images]).reshape(-1, len(coords))
    pf = np.abs(pfaffian_values(target, imgs)) if imgs.shape[0] else np.zeros(0)
    with np.errstate(invalid="ignore"):
        off = np.flatnonzero(~(pf <= s.critical_threshold))
    return CheckResult(
        f"critical:{piece.name}",
        CheckVerdict.INFO,
        residual=float(np.nanmax(pf)) if np.isfinite(pf).any() else None,
        witness=scan.points[off[0]] if off.size else None,
        citation="critical_values",
        detail={**scan.to_dict(), "off_locus_images": int(off.size)},
    )


def verify_resolution(
    cand: ResolutionCandidate,
    settings: Optional[Settings] = None,
    log: Optional[EventLog] = None,
    jacobi: Optional[Sequence[Tuple[str, JacobiVerdict]]] = None,
) -> Report:
    """
    Run every check on a candidate and aggregate an overall status.

    jacobi carries (structure label, verdict) pairs already computed for the
    target and every piece, in that order; they are reported as they are.

    Refuted    : a Jacobi, symplecticity, morphism or probe check failed
    Inconclusive: coverage below 1, an inconsistent regular or critical
                  value, or a target verdict that excludes this kind of
                  resolution outright
    Verified   : otherwise
    """
    s = settings or Settings()
    checks: List[CheckResult] = []
    notes: List[str] = []

    def emit(event_type: str, payload: dict) -> None:
        if log is not None:
            log.append(event_type, payload, stage="verify")

    # Jacobi
    if s.check_jacobi:
        if jacobi is None:
            structures = [("target", cand.target)] + [(p.name, p.structure) for p in cand.pieces]
            jacobi = [
                (label, verify_jacobi(P, n_samples=s.jacobi_samples, tol=s.tol, seed=s.seed))
                for label, P in structures
            ]
        for label, jv in jacobi:
            checks.append(
                CheckResult(
                    f"jacobi:{label}",
                    CheckVerdict.PASS if jv.passed else CheckVerdict.FAIL,
                    residual=jv.worst_gap,
                    witness=jv.witness,
                    detail={"triple": list(jv.triple) if jv.triple else None, "samples": jv.samples},
                )
            )
            emit("jacobi", {"structure": label, **jv.to_dict()})
    else:
        checks.append(CheckResult("jacobi", CheckVerdict.SKIPPED))

    # symplecticity and morphism per piece
    for piece in cand.pieces:
        sv = verify_symplectic(
            piece.structure,
            n_samples=s.symplectic_samples,
            tol=s.symplectic_tol,
            seed=s.seed,
            grid=s.locus_grid_for(piece.structure.dim),
            refine_tol=s.refine_tol,
            zero_tol=s.zero_tol,
        )
        checks.append(
            CheckResult(
                f"symplectic:{piece.name}",
                CheckVerdict.PASS if sv.passed else CheckVerdict.FAIL,
                residual=sv.min_abs_pfaffian,
                witness=sv.witness,
                citation="resolution_definition",
                detail={"samples": sv.samples, "locus_zero_points": sv.locus_zero_points},
            )
        )
        emit("symplectic", {"piece": piece.name, **sv.to_dict()})

    for piece in cand.pieces:
        mv = verify_morphism(
            piece.structure, cand.target, piece.map,
            n_samples=s.morphism_samples, tol=s.tol, seed=s.seed,
        )
        checks.append(
            CheckResult(
                f"morphism:{piece.name}",
                CheckVerdict.PASS if mv.status is MorphismStatus.MORPHISM else CheckVerdict.FAIL,
                residual=mv.worst_residual,
                witness=mv.witness,
                citation="morphism_criterion",
                detail={"samples": mv.samples_used, "pair": list(mv.pair) if mv.pair else None},
            )
        )
        emit("morphism", {"piece": piece.name, **mv.to_dict()})
        for k, probe in enumerate(piece.probes):
            checks.append(_probe_check(piece, cand.target, probe, k, s.tol))
        checks.append(_critical_check(piece, cand.target, s))
        emit("critical_scan", {"piece": piece.name, **checks[-1].detail})

    # coverage and value consistency
    cov = surjectivity_coverage(cand, grid=s.coverage_grid, solver=s.solver, seed=s.seed, log=log)
    uncovered = cov.uncovered(cand.target.chart.coords)
    finite_res = cov.residuals[np.isfinite(cov.residuals)]
    checks.append(
        CheckResult(
            "coverage",
            CheckVerdict.PASS if cov.covered == cov.total else CheckVerdict.FAIL,
            residual=float(finite_res.max()) if finite_res.size else None,
            witness=uncovered[0] if uncovered else None,
            citation="resolution_definition",
            detail={"covered": cov.covered, "total": cov.total},
        )
    )
    coverage_dict = cov.to_dict(
        cand.target.chart.coords, [p.structure.chart.coords for p in cand.pieces]
    )
    emit("coverage", {k: coverage_dict[k] for k in ("grid", "covered", "total", "per_piece")})

    vc = value_consistency(cand, cov, threshold=s.critical_threshold, rank_threshold=s.rank_threshold)
    checks.append(
        CheckResult(
            "regular_values",
            CheckVerdict.FAIL if vc.regular_failures else CheckVerdict.PASS,
            residual=vc.regular_worst if vc.regular_checked else None,
            witness=vc.regular_witness,
            citation="critical_values",
            detail={"checked": vc.regular_checked, "failures": vc.regular_failures},
        )
    )
    checks.append(
        CheckResult(
            "critical_values",
            CheckVerdict.FAIL
            if vc.critical_failures
            else (CheckVerdict.PASS if vc.critical_checked else CheckVerdict.SKIPPED),
            residual=vc.critical_worst if vc.critical_checked else None,
            witness=vc.critical_witness,
            citation="critical_values",
            detail={"checked": vc.critical_checked, "failures": vc.critical_failures},
        )
    )
    emit("regular_values", vc.to_dict())

    # target obstruction, reported but never a failure by itself
    ov: ObstructionVerdict = obstruction_verdict(cand.target, settings=s, log=log)
    checks.append(
        CheckResult(
            "obstruction",
            CheckVerdict.INFO,
            residual=None,
            citation=ov.citations[0] if ov.citations else None,
            detail={"status": ov.status.value},
        )
    )

    refuting = [
        c.name
        for c in checks
        if c.failed and c.name.split(":")[0] in ("jacobi", "symplectic", "morphism", "probe")
    ]
    soft = [c.name for c in checks if c.failed and c.name in ("coverage", "regular_values", "critical_values")]
    excluded = ov.status in (
        ObstructionStatus.NOT_DENSE_SYMPLECTIC,
        ObstructionStatus.NO_RESOLUTION_RANK_ZERO,
    )
    if refuting:
        status = OverallStatus.REFUTED
        notes.append(f"refuted by: {', '.join(refuting)}")
    elif soft or excluded:
        status = OverallStatus.INCONCLUSIVE
        if soft:
            notes.append(f"inconclusive checks: {', '.join(soft)}")
        if excluded:
            notes.append(
                f"target verdict {ov.status.value} excludes this kind of resolution "
                "although every sampled check passed; the samples are not conclusive"
            )
    else:
        status = OverallStatus.VERIFIED

    if ov.status is ObstructionStatus.NO_PROPER_RESOLUTION:
        notes.append(
            "codimension-one singular locus: no PROPER symplectic resolution of the target "
            "exists; this candidate is not checked for properness and may be non-proper "
            "or disconnected"
        )
    notes.append(
        "coverage is measured on a grid of the target box; it is evidence for, not a "
        "proof of, surjectivity"
    )
    notes.extend(ov.notes)
    emit("verdict", {"status": status.value, "refuted_by": refuting, "inconclusive": soft})

    return Report(
        version=__version__,
        command="verify",
        status=status.value,
        input_digest=stable_hash(cand.to_dict()),
        config_hash=stable_hash(s.to_dict()),
        checks=checks,
        coverage=coverage_dict,
        locus=ov.locus.to_dict(),
        obstruction=ov.to_dict(),
        notes=notes,
    )
