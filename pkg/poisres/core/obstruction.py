"""
Non-existence verdicts for symplectic resolutions of a target structure.

Decision table on the sampled singular locus:

    FatRegion              -> NotDenseSymplectic
    CodimOneHypersurface   -> NoProperResolution
                              (NoResolutionRankZero when dim >= 4 and pi
                               vanishes at every sampled locus point)
    IsolatedPoints         -> Inconclusive
    Empty                  -> SymplecticOnBox

Every verdict is conditional on the hypothesis class of the result it
cites (proper, separable, holomorphic connected). No verdict is issued
for connected smooth resolutions.
"""

from dataclasses import dataclass, field
from typing import Dict, List, Optional

from .chart import GridSpec
from .event_log import EventLog
from .locus import LocusClass, LocusScan, classify_locus, locus_tangency, rank_on_locus, scan_singular_locus
from .poisson import PoissonStructure
from .settings import Settings
from .utils import json_float
from .verdicts import CITATIONS, LocusKind, ObstructionStatus


@dataclass(frozen=True)
class ObstructionVerdict:
    """
    Invariants:
    - status follows the decision table from locus.kind and the locus ranks
    - citations are keys of CITATIONS
    """
    status: ObstructionStatus
    citations: List[str]
    locus: LocusClass
    scan: LocusScan
    rank_histogram: Dict[int, int] = field(default_factory=dict)
    corank_two: bool = False
    tangency: float = 0.0
    notes: List[str] = field(default_factory=list)

    @property
    def cited_result(self) -> str:
        return "; ".join(CITATIONS[key] for key in self.citations)

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "citations": [{"key": k, "statement": CITATIONS[k]} for k in self.citations],
            "locus": self.locus.to_dict(),
            "scan": self.scan.to_dict(),
            "rank_histogram": {str(k): v for k, v in sorted(self.rank_histogram.items())},
            "corank_two": self.corank_two,
            "tangency": json_float(self.tangency),
            "notes": list(self.notes),
        }


def obstruction_verdict(
    P: PoissonStructure,
    grid: Optional[GridSpec] = None,
    settings: Optional[Settings] = None,
    log: Optional[EventLog] = None,
) -> ObstructionVerdict:
    s = settings or Settings()
    grid = grid if grid is not None else s.locus_grid_for(P.dim)

    scan = scan_singular_locus(P, grid, refine_tol=s.refine_tol, zero_tol=s.zero_tol, grad_tol=s.grad_tol)
    locus = classify_locus(scan, P, grad_tol=s.grad_tol, quorum=s.quorum)
    ranks = rank_on_locus(P, scan, s.rank_threshold)
    histogram: Dict[int, int] = {}
    for r in ranks:
        histogram[r.rank] = histogram.get(r.rank, 0) + 1
    if log is not None:
        log.append(
            "locus_scan",
            {"kind": locus.kind.value, "scan": scan.to_dict(), "ranks": dict(sorted(histogram.items()))},
            stage="obstruction",
        )

    corank_two = P.dim >= 4 and histogram.get(P.dim - 2, 0) > 0
    tangency = 0.0
    notes: List[str] = []

    if locus.kind is LocusKind.FAT_REGION:
        status = ObstructionStatus.NOT_DENSE_SYMPLECTIC
        citations = ["dense_symplectic"]
        notes.append("the Pfaffian vanishes on an open region of the box: no separable resolution")
    elif locus.kind is LocusKind.CODIM_ONE_HYPERSURFACE:
        tangency = locus_tangency(P, scan)
        all_zero = bool(ranks) and set(histogram) == {0}
        if P.dim >= 4 and all_zero:
            status = ObstructionStatus.NO_RESOLUTION_RANK_ZERO
            citations = ["rank_zero", "codim_one"]
            notes.append("pi vanishes at every sampled point of a codimension-one singular locus")
        else:
            status = ObstructionStatus.NO_PROPER_RESOLUTION
            citations = ["codim_one_surface", "codim_one"] if P.dim == 2 else ["codim_one"]
            if corank_two:
                citations.append("corank_two")
            notes.append(
                "codimension-one singular locus: no PROPER symplectic resolution exists "
                "(and no connected one in the holomorphic case); non-proper or "
                "disconnected resolutions are not excluded"
            )
            notes.append(CITATIONS["open_smooth_connected"])
    elif locus.kind is LocusKind.ISOLATED_POINTS:
        status = ObstructionStatus.INCONCLUSIVE
        citations = ["isolated"]
        if locus.evidence.get("irregular_sheet"):
            notes.append("zero cells form a sheet but the Pfaffian is not regular along it")
    else:
        status = ObstructionStatus.SYMPLECTIC_ON_BOX
        citations = []

    verdict = ObstructionVerdict(
        status=status,
        citations=citations,
        locus=locus,
        scan=scan,
        rank_histogram=histogram,
        corank_two=corank_two,
        tangency=tangency,
        notes=notes,
    )
    if log is not None:
        log.append("obstruction", {"status": status.value, "citations": citations}, stage="obstruction")
    return verdict
