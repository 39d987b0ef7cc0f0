"""
Smooth maps between charts and the Poisson-morphism test.

phi is Poisson iff {phi*x_i, phi*x_j}_source = phi*{x_i, x_j}_target for
every pair of target coordinates; in dimension 2 this reads
{p,q} (u_p v_q - u_q v_p) = f(u, v).
"""

from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Mapping, Optional, Tuple, Union

import numpy as np

from .calculus import differentiate, simplify
from .chart import (
    Chart,
    GridSpec,
    bisect_edges,
    descend_to_zero,
    dip_nodes,
    grid_points,
    grid_steps,
    sign_change_edges,
)
from .errors import DimensionError, UnknownVariableError
from .expr import Expr, Var, evaluate, evaluate_batch, free_variables, substitute
from .identity import draw_defined_samples
from .linalg import determinant_expr
from .parser import parse
from .poisson import PoissonStructure, bracket
from .utils import json_float, json_point
from .verdicts import MorphismStatus

DEFAULT_CRITICAL_THRESHOLD = 1e-7


@dataclass(frozen=True)
class SmoothMap:
    """
    Component expressions from a source chart to a target chart.

    Invariants:
    - one component per target coordinate, in target order
    - components only use source coordinates
    """
    source: Chart
    target: Chart
    components: Tuple[Expr, ...]

    def __post_init__(self) -> None:
        comps = tuple(self.components)
        if len(comps) != self.target.dim:
            raise DimensionError(
                f"map has {len(comps)} components, target chart has {self.target.dim} coordinates"
            )
        for c in comps:
            extra = free_variables(c) - set(self.source.coords)
            if extra:
                raise UnknownVariableError(extra, self.source.coords)
        object.__setattr__(self, "components", comps)

    @staticmethod
    def from_mapping(
        source: Chart, target: Chart, mapping: Mapping[str, Union[str, Expr]]
    ) -> "SmoothMap":
        missing = [name for name in target.coords if name not in mapping]
        if missing:
            raise DimensionError(f"map is missing components for {', '.join(missing)}")
        extra = set(mapping) - set(target.coords)
        if extra:
            raise UnknownVariableError(extra, target.coords)
        comps = []
        for name in target.coords:
            value = mapping[name]
            comps.append(parse(value) if isinstance(value, str) else value)
        return SmoothMap(source, target, tuple(comps))

    @staticmethod
    def identity(chart: Chart) -> "SmoothMap":
        return SmoothMap(chart, chart, tuple(Var(name) for name in chart.coords))

    @cached_property
    def jacobian_exprs(self) -> Tuple[Tuple[Expr, ...], ...]:
        """[i][j] = d component_i / d source_j."""
        return tuple(
            tuple(differentiate(c, name) for name in self.source.coords) for c in self.components
        )

    def images(self, points: np.ndarray) -> np.ndarray:
        """Images of the rows of an (N, source dim) array; NaN where undefined."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        env = self.source.env(points)
        n = points.shape[0]
        cols = [np.broadcast_to(evaluate_batch(c, env), (n,)) for c in self.components]
        return np.stack(cols, axis=-1)

    def to_dict(self) -> dict:
        return {
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
            "map": {name: str(c) for name, c in zip(self.target.coords, self.components)},
        }


@dataclass(frozen=True)
class MorphismVerdict:
    """
    Invariants:
    - NOT_MORPHISM implies witness is present and its residual exceeds tolerance
    """
    status: MorphismStatus
    worst_residual: float
    witness: Optional[Dict[str, float]]
    samples_used: int
    pair: Optional[Tuple[str, str]] = None

    def to_dict(self) -> dict:
        return {
            "status": self.status.value,
            "worst_residual": json_float(self.worst_residual),
            "witness": json_point(self.witness),
            "samples_used": self.samples_used,
            "pair": list(self.pair) if self.pair else None,
        }


@dataclass(frozen=True)
class CriticalScan:
    points: Tuple[Dict[str, float], ...]
    images: Tuple[Dict[str, float], ...]
    grid_nodes: int
    critical_nodes: int
    refined_points: int
    touch_points: int = 0

    @property
    def everywhere_critical(self) -> bool:
        return self.grid_nodes > 0 and self.critical_nodes == self.grid_nodes

    def to_dict(self, limit: int = 5) -> dict:
        return {
            "count": len(self.points),
            "grid_nodes": self.grid_nodes,
            "critical_nodes": self.critical_nodes,
            "refined_points": self.refined_points,
            "touch_points": self.touch_points,
            "everywhere_critical": self.everywhere_critical,
            "examples": [
                {"source": json_point(p), "image": json_point(q)}
                for p, q in zip(self.points[:limit], self.images[:limit])
            ],
        }


# ----------------------------
# Symbolic pieces
# ----------------------------

def pullback(m: SmoothMap, f: Expr) -> Expr:
    """phi* f: simultaneous substitution of the components, simplified."""
    extra = free_variables(f) - set(m.target.coords)
    if extra:
        raise UnknownVariableError(extra, m.target.coords)
    return simplify(substitute(f, dict(zip(m.target.coords, m.components))))


def jacobian_exprs(m: SmoothMap) -> Tuple[Tuple[Expr, ...], ...]:
    return m.jacobian_exprs


def jacobian_at(m: SmoothMap, point: Mapping[str, float]) -> np.ndarray:
    m.source.warn_if_outside(point)
    return np.array([[evaluate(e, point) for e in row] for row in m.jacobian_exprs])


def jacobian_batch(m: SmoothMap, points: np.ndarray) -> np.ndarray:
    """(N, target dim, source dim) Jacobians; NaN where undefined."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    env = m.source.env(points)
    n = points.shape[0]
    rows = [
        np.stack([np.broadcast_to(evaluate_batch(e, env), (n,)) for e in row], axis=-1)
        for row in m.jacobian_exprs
    ]
    return np.stack(rows, axis=1)


def jacobian_det_expr(m: SmoothMap) -> Expr:
    if m.source.dim != m.target.dim:
        raise DimensionError(
            f"determinant needs a square Jacobian, map is {m.source.dim} -> {m.target.dim}"
        )
    return determinant_expr([list(row) for row in m.jacobian_exprs])


def normalized_det_batch(m: SmoothMap, points: np.ndarray) -> np.ndarray:
    """det J after dividing each row by max(1, |row|); NaN where undefined."""
    jac = jacobian_batch(m, points)
    norms = np.linalg.norm(jac, axis=-1, keepdims=True)
    scaled = jac / np.maximum(1.0, norms)
    out = np.full(jac.shape[0], np.nan)
    ok = np.all(np.isfinite(scaled), axis=(1, 2))
    if ok.any():
        out[ok] = np.linalg.det(scaled[ok])
    return out


def morphism_pairs(
    source: PoissonStructure, target: PoissonStructure, m: SmoothMap
) -> List[Tuple[Tuple[str, str], Expr, Expr]]:
    """((x_i, x_j), {phi*x_i, phi*x_j}_source, phi*pi^ij_target) for every i<j."""
    if m.source.coords != source.chart.coords or m.target.coords != target.chart.coords:
        raise DimensionError("map charts do not match the source and target structures")
    names = target.chart.coords
    out = []
    for (i, j), pij in target.upper.items():
        lhs = bracket(source, m.components[i], m.components[j])
        rhs = pullback(m, pij)
        out.append(((names[i], names[j]), lhs, rhs))
    return out


def morphism_residual(
    source: PoissonStructure,
    target: PoissonStructure,
    m: SmoothMap,
    point: Mapping[str, float],
) -> float:
    """Raw gap max_{i<j} |lhs - rhs| at one source point."""
    source.chart.warn_if_outside(point)
    worst = 0.0
    for _, lhs, rhs in morphism_pairs(source, target, m):
        worst = max(worst, abs(evaluate(lhs, point) - evaluate(rhs, point)))
    return worst


def verify_morphism(
    source: PoissonStructure,
    target: PoissonStructure,
    m: SmoothMap,
    n_samples: int = 10_000,
    tol: float = 1e-9,
    seed: int = 42,
) -> MorphismVerdict:
    """
    Sampled Poisson-morphism check.

    A pair passes at a sample when |lhs - rhs| <= tol * (1 + |rhs|).
    The first failing sample in draw order is the witness.
    """
    pairs = morphism_pairs(source, target, m)
    if not pairs:
        return MorphismVerdict(MorphismStatus.MORPHISM, 0.0, None, 0)

    exprs = tuple(e for _, lhs, rhs in pairs for e in (lhs, rhs))
    rng = np.random.default_rng(seed)
    env, values = draw_defined_samples(exprs, source.chart.box_dict(), n_samples, rng)

    worst = 0.0
    first: Optional[Tuple[int, Tuple[str, str]]] = None
    for k, (names, _, _) in enumerate(pairs):
        lhs, rhs = values[2 * k], values[2 * k + 1]
        gaps = np.abs(lhs - rhs)
        worst = max(worst, float(gaps.max()))
        bad = np.flatnonzero(gaps > tol * (1.0 + np.abs(rhs)))
        if bad.size and (first is None or bad[0] < first[0]):
            first = (int(bad[0]), names)

    if first is None:
        return MorphismVerdict(MorphismStatus.MORPHISM, worst, None, n_samples)
    idx, names = first
    witness = {name: float(col[idx]) for name, col in env.items()}
    return MorphismVerdict(MorphismStatus.NOT_MORPHISM, worst, witness, n_samples, names)


def critical_scan(
    m: SmoothMap,
    grid: GridSpec = 41,
    threshold: float = DEFAULT_CRITICAL_THRESHOLD,
    refine_tol: float = 1e-10,
) -> CriticalScan:
    """
    Source points where the row-normalised |det J| falls below threshold.

    Grid nodes below threshold are kept as they are; sign changes of det J
    along grid edges are refined by bisection, and local minima of |det J|
    that dip towards 0 (det J = q^2 between nodes) by Gauss-Newton descent.
    """
    if m.source.dim != m.target.dim:
        raise DimensionError("critical_scan needs a square map")
    nodes = grid_points(m.source, grid)
    dets = normalized_det_batch(m, nodes)
    with np.errstate(invalid="ignore"):
        low = np.abs(dets) < threshold
    crit = nodes[low]

    def fn(pts: np.ndarray) -> np.ndarray:
        return normalized_det_batch(m, pts)

    a, b, fa = sign_change_edges(m.source, grid, dets)
    refined = bisect_edges(fn, a, b, fa, refine_tol).reshape(-1, m.source.dim)
    dips = dip_nodes(m.source, grid, dets) & ~low
    touched = descend_to_zero(fn, m.source, nodes[dips], grid_steps(m.source, grid), threshold)
    crit = np.concatenate([crit, refined, touched])

    imgs = m.images(crit) if crit.size else np.zeros((0, m.target.dim))
    return CriticalScan(
        points=tuple(m.source.point(row) for row in crit),
        images=tuple(m.target.point(row) for row in imgs),
        grid_nodes=int(nodes.shape[0]),
        critical_nodes=int(np.count_nonzero(low)),
        refined_points=int(refined.shape[0]),
        touch_points=int(touched.shape[0]),
    )
