"""
Singular-locus scanning and classification.

The singular locus of an even-dimensional structure is the zero set of its
Pfaffian. It is sampled on a grid: near-zero nodes are kept as they are,
sign changes along grid edges are refined by bisection, local minima of
|Pf| that dip towards 0 are followed by Gauss-Newton descent, and every
grid cell touching a zero is marked. Connected groups of marked cells are then
measured to tell sheets (codimension one) from isolated clusters.
"""

import itertools
from dataclasses import dataclass, field
from typing import Dict, List, Tuple

import numpy as np
from scipy import ndimage

from .chart import (
    GridSpec,
    bisect_edges,
    cell_indices,
    descend_to_zero,
    dip_nodes,
    grid_points,
    grid_steps,
    per_axis,
    sign_change_edges,
)
from .errors import DimensionError
from .poisson import (
    DEFAULT_RANK_THRESHOLD,
    PointRank,
    PoissonStructure,
    gradient_values,
    matrix_batch,
    pfaffian_values,
    ranks_at,
)
from .utils import json_float, json_point
from .verdicts import LocusKind


@dataclass(frozen=True)
class LocusScan:
    """
    Sampled zero set of the Pfaffian.

    Invariants:
    - every zero point lies in the chart box
    - gradient_norms and hessian_regular are aligned with zero_points
    - cell_map has (n_axis - 1) cells per axis
    """
    grid: Tuple[int, ...]
    zero_points: np.ndarray
    gradient_norms: np.ndarray
    hessian_regular: np.ndarray
    cell_map: np.ndarray
    fat: bool
    near_zero_nodes: int
    refined_points: int
    touch_points: int = 0

    @property
    def empty(self) -> bool:
        return self.zero_points.shape[0] == 0 and not self.cell_map.any()

    def to_dict(self, limit: int = 5) -> dict:
        return {
            "grid": list(self.grid),
            "zero_points": int(self.zero_points.shape[0]),
            "near_zero_nodes": self.near_zero_nodes,
            "refined_points": self.refined_points,
            "touch_points": self.touch_points,
            "marked_cells": int(np.count_nonzero(self.cell_map)),
            "fat": self.fat,
            "max_gradient_norm": json_float(
                float(self.gradient_norms.max()) if self.gradient_norms.size else 0.0
            ),
        }


@dataclass(frozen=True)
class LocusClass:
    kind: LocusKind
    evidence: Dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"kind": self.kind.value, "evidence": self.evidence}


def _corner_views(arr: np.ndarray) -> List[np.ndarray]:
    """The 2^d corner arrays of every cell of a node array."""
    d = arr.ndim
    views = []
    for offsets in itertools.product((0, 1), repeat=d):
        sl = tuple(slice(o, arr.shape[k] - 1 + o) for k, o in enumerate(offsets))
        views.append(arr[sl])
    return views


def scan_singular_locus(
    P: PoissonStructure,
    grid: GridSpec,
    refine_tol: float = 1e-10,
    zero_tol: float = 1e-9,
    grad_tol: float = 1e-6,
) -> LocusScan:
    if P.dim % 2:
        raise DimensionError(f"singular-locus scan needs an even dimension, chart has {P.dim}")
    counts = tuple(per_axis(P.chart, grid))
    nodes = grid_points(P.chart, counts)
    pf = pfaffian_values(P, nodes)

    with np.errstate(invalid="ignore"):
        near = np.abs(pf) < zero_tol
    a, b, fa = sign_change_edges(P.chart, counts, pf)
    def fn(pts: np.ndarray) -> np.ndarray:
        return pfaffian_values(P, pts)

    refined = bisect_edges(fn, a, b, fa, refine_tol).reshape(-1, P.dim)
    # zeros where Pf touches 0 between nodes without changing sign
    dips = dip_nodes(P.chart, counts, pf) & ~near
    touched = descend_to_zero(fn, P.chart, nodes[dips], grid_steps(P.chart, counts), zero_tol)
    zero_points = np.concatenate([nodes[near], refined, touched])

    # cells: touching a near-zero node, or with corners of both signs
    vals = pf.reshape(counts)
    near_grid = near.reshape(counts)
    corners_near = _corner_views(near_grid)
    with np.errstate(invalid="ignore"):
        corners_pos = [v > 0 for v in _corner_views(vals)]
        corners_neg = [v < 0 for v in _corner_views(vals)]
    any_near = np.logical_or.reduce(corners_near)
    all_near = np.logical_and.reduce(corners_near)
    mixed = np.logical_or.reduce(corners_pos) & np.logical_or.reduce(corners_neg)
    cell_map = any_near | mixed
    if touched.shape[0]:
        cell_map[cell_indices(P.chart, counts, touched)] = True

    # a 2x...x2 block of cells whose every corner is near zero
    if all(c >= 2 for c in all_near.shape):
        fat = bool(np.logical_and.reduce(_corner_views(all_near)).any())
    else:
        fat = bool(all_near.size and all_near.all())

    grads, regular = _regularity(P, zero_points, grad_tol)
    return LocusScan(
        grid=counts,
        zero_points=zero_points,
        gradient_norms=grads,
        hessian_regular=regular,
        cell_map=cell_map,
        fat=fat,
        near_zero_nodes=int(np.count_nonzero(near)),
        refined_points=int(refined.shape[0]),
        touch_points=int(touched.shape[0]),
    )


def _regularity(
    P: PoissonStructure, points: np.ndarray, grad_tol: float
) -> Tuple[np.ndarray, np.ndarray]:
    """|grad Pf| at each point and whether the Hessian has exactly one singular value above grad_tol."""
    if points.shape[0] == 0:
        return np.zeros(0), np.zeros(0, dtype=bool)
    grad = gradient_values(P.pfaffian_gradient, P.chart, points)
    norms = np.linalg.norm(grad, axis=1)
    hess = np.stack(
        [gradient_values(row, P.chart, points) for row in P.pfaffian_hessian], axis=1
    )
    ok = np.all(np.isfinite(hess), axis=(1, 2))
    regular = np.zeros(points.shape[0], dtype=bool)
    if ok.any():
        sv = np.linalg.svd(hess[ok], compute_uv=False)
        regular[ok] = np.count_nonzero(sv > grad_tol, axis=1) == 1
    norms[~np.isfinite(norms)] = 0.0
    return norms, regular


def _components(cell_map: np.ndarray) -> Tuple[int, int]:
    """(number of connected components, number of them that are sheets)."""
    if not cell_map.any():
        return 0, 0
    d = cell_map.ndim
    labels, count = ndimage.label(cell_map, structure=np.ones((3,) * d, dtype=bool))
    sheets = 0
    for sl in ndimage.find_objects(labels):
        if sl is None:
            continue
        spans = [s.stop - s.start for s in sl]
        long_axes = sum(1 for span in spans if span > 2)
        if long_axes >= max(1, d - 1):
            sheets += 1
    return int(count), sheets


def classify_locus(
    scan: LocusScan,
    P: PoissonStructure,
    grad_tol: float = 1e-6,
    quorum: float = 0.9,
) -> LocusClass:
    """
    FatRegion > CodimOneHypersurface > IsolatedPoints > Empty.

    A zero point is regular when |grad Pf| > grad_tol or the Hessian of Pf
    has exactly one singular value above grad_tol (a double sheet).
    """
    components, sheets = _components(scan.cell_map)
    n = scan.zero_points.shape[0]
    regular = (scan.gradient_norms > grad_tol) | scan.hessian_regular
    regular_fraction = float(np.count_nonzero(regular)) / n if n else 0.0
    evidence = {
        "zero_points": n,
        "marked_cells": int(np.count_nonzero(scan.cell_map)),
        "components": components,
        "sheet_components": sheets,
        "regular_fraction": json_float(regular_fraction),
        "examples": [json_point(P.chart.point(row)) for row in scan.zero_points[:5]],
    }

    if scan.fat:
        kind = LocusKind.FAT_REGION
    elif scan.empty:
        kind = LocusKind.EMPTY
    elif sheets > 0 and regular_fraction >= quorum:
        kind = LocusKind.CODIM_ONE_HYPERSURFACE
    else:
        if sheets > 0:
            evidence["irregular_sheet"] = True
        kind = LocusKind.ISOLATED_POINTS
    return LocusClass(kind=kind, evidence=evidence)


def rank_on_locus(
    P: PoissonStructure,
    scan: LocusScan,
    rel_threshold: float = DEFAULT_RANK_THRESHOLD,
) -> List[PointRank]:
    return ranks_at(P, scan.zero_points, rel_threshold)


def locus_tangency(P: PoissonStructure, scan: LocusScan) -> float:
    """
    max over zero points and coordinates of |<grad Pf, X_{x_i}>| / (1 + |grad Pf| |X_{x_i}|).

    X_{x_i} is column i of pi, so the pairing is (grad Pf)^T pi.
    """
    pts = scan.zero_points
    if pts.shape[0] == 0:
        return 0.0
    grad = gradient_values(P.pfaffian_gradient, P.chart, pts)
    mats = matrix_batch(P, pts)
    pair = np.einsum("nk,nki->ni", grad, mats)
    scale = 1.0 + np.linalg.norm(grad, axis=1)[:, None] * np.linalg.norm(mats, axis=1)
    ratio = np.abs(pair) / scale
    ratio = ratio[np.isfinite(ratio)]
    return float(ratio.max()) if ratio.size else 0.0
