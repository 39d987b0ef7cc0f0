import math
import warnings
from dataclasses import dataclass
from typing import Callable, Dict, List, Mapping, Sequence, Tuple, Union

import numpy as np
from scipy import ndimage

from .errors import DimensionError, OutsideBoxWarning
from .expr import IDENTIFIER

Interval = Tuple[float, float]
GridSpec = Union[int, Sequence[int]]


@dataclass(frozen=True)
class Chart:
    """
    Local coordinates plus a compact sampling box.

    Invariants:
    - coordinate names are distinct identifiers
    - every interval has positive finite length
    """
    coords: Tuple[str, ...]
    box: Tuple[Interval, ...]

    def __post_init__(self) -> None:
        coords = tuple(self.coords)
        box = tuple((float(lo), float(hi)) for lo, hi in self.box)
        if len(coords) != len(box):
            raise DimensionError(f"{len(coords)} coordinates but {len(box)} box intervals")
        if len(set(coords)) != len(coords):
            raise ValueError(f"duplicate coordinate names in {coords}")
        for name in coords:
            if not isinstance(name, str) or not IDENTIFIER.match(name):
                raise ValueError(f"invalid coordinate name: {name!r}")
        for name, (lo, hi) in zip(coords, box):
            if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
                raise ValueError(f"box interval for {name} must be finite with lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "box", box)

    @property
    def dim(self) -> int:
        return len(self.coords)

    @property
    def lower(self) -> np.ndarray:
        return np.array([lo for lo, _ in self.box])

    @property
    def upper(self) -> np.ndarray:
        return np.array([hi for _, hi in self.box])

    def box_dict(self) -> Dict[str, Interval]:
        return dict(zip(self.coords, self.box))

    def contains(self, point: Mapping[str, float], slack: float = 1e-12) -> bool:
        for name, (lo, hi) in zip(self.coords, self.box):
            pad = slack * (1.0 + max(abs(lo), abs(hi)))
            if not (lo - pad <= point[name] <= hi + pad):
                return False
        return True

    def warn_if_outside(self, point: Mapping[str, float]) -> None:
        if not self.contains(point):
            warnings.warn(
                f"point {dict(point)} lies outside the box of chart {self.coords}",
                OutsideBoxWarning,
                stacklevel=3,
            )

    def point(self, row: Sequence[float]) -> Dict[str, float]:
        return {name: float(v) for name, v in zip(self.coords, row)}

    def env(self, points: np.ndarray) -> Dict[str, np.ndarray]:
        """Column view of an (N, dim) array, keyed by coordinate name."""
        points = np.asarray(points, dtype=float)
        return {name: points[..., i] for i, name in enumerate(self.coords)}

    def to_dict(self) -> dict:
        return {
            "coords": list(self.coords),
            "box": [[lo, hi] for lo, hi in self.box],
        }


def per_axis(chart: Chart, grid: GridSpec) -> List[int]:
    if isinstance(grid, (int, np.integer)):
        counts = [int(grid)] * chart.dim
    else:
        counts = [int(g) for g in grid]
        if len(counts) == 1:
            counts = counts * chart.dim
    if len(counts) != chart.dim:
        raise DimensionError(f"grid has {len(counts)} axes, chart has {chart.dim}")
    if any(c < 2 for c in counts):
        raise ValueError("grid needs at least 2 points per axis")
    return counts


def grid_axes(chart: Chart, grid: GridSpec) -> List[np.ndarray]:
    return [np.linspace(lo, hi, n) for (lo, hi), n in zip(chart.box, per_axis(chart, grid))]


def grid_points(chart: Chart, grid: GridSpec) -> np.ndarray:
    """All grid nodes as an (N, dim) array in C (row-major, ij) order."""
    axes = grid_axes(chart, grid)
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([m.ravel() for m in mesh], axis=-1)


def sample_points(chart: Chart, n: int, rng: np.random.Generator) -> np.ndarray:
    """n uniform points of the box, (n, dim)."""
    return rng.uniform(chart.lower, chart.upper, size=(int(n), chart.dim))


def sign_change_edges(
    chart: Chart, grid: GridSpec, values: np.ndarray
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Grid edges whose endpoint values have strictly opposite signs.

    values holds one entry per node of grid_points(chart, grid). Returns
    (a, b, f(a)) with a, b of shape (K, dim).
    """
    counts = per_axis(chart, grid)
    d = chart.dim
    vals = np.asarray(values, dtype=float).reshape(counts)
    pts = grid_points(chart, grid).reshape(*counts, d)
    starts, ends, fstarts = [], [], []
    for k in range(d):
        lo = [slice(None)] * d
        hi = [slice(None)] * d
        lo[k] = slice(0, -1)
        hi[k] = slice(1, None)
        v0 = vals[tuple(lo)]
        v1 = vals[tuple(hi)]
        with np.errstate(invalid="ignore"):
            mask = np.isfinite(v0) & np.isfinite(v1) & (np.sign(v0) * np.sign(v1) < 0)
        starts.append(pts[tuple(lo)][mask])
        ends.append(pts[tuple(hi)][mask])
        fstarts.append(v0[mask])
    return np.concatenate(starts), np.concatenate(ends), np.concatenate(fstarts)


def bisect_edges(
    fn: Callable[[np.ndarray], np.ndarray],
    a: np.ndarray,
    b: np.ndarray,
    fa: np.ndarray,
    tol: float,
    max_iter: int = 200,
) -> np.ndarray:
    """Vectorised bisection on segments [a, b] bracketing a sign change of fn."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    fa = np.array(fa, dtype=float)
    if a.size == 0:
        return a
    for _ in range(max_iter):
        if np.max(np.linalg.norm(b - a, axis=1)) <= tol:
            break
        mid = 0.5 * (a + b)
        fm = fn(mid)
        # root lies in [mid, b] when f(mid) keeps the sign of f(a)
        right = np.sign(fm) == np.sign(fa)
        a = np.where(right[:, None], mid, a)
        fa = np.where(right, fm, fa)
        b = np.where(right[:, None], b, mid)
    return 0.5 * (a + b)


def grid_steps(chart: Chart, grid: GridSpec) -> np.ndarray:
    counts = np.array(per_axis(chart, grid), dtype=float)
    return (chart.upper - chart.lower) / (counts - 1)


def cell_indices(chart: Chart, grid: GridSpec, points: np.ndarray) -> Tuple[np.ndarray, ...]:
    """Index of the grid cell holding each point, one array per axis."""
    counts = np.array(per_axis(chart, grid))
    idx = np.floor((np.asarray(points, dtype=float) - chart.lower) / grid_steps(chart, grid))
    idx = np.clip(idx.astype(int), 0, counts - 2)
    return tuple(idx.T)


def dip_nodes(chart: Chart, grid: GridSpec, values: np.ndarray, ratio: float = 0.5) -> np.ndarray:
    """
    Nodes where |f| has a local minimum well below its neighbourhood and f
    keeps one sign around it.

    These bracket zeros that touch 0 between nodes (x^2 on an even grid),
    which sign changes never reveal. Returns a mask in grid_points order.
    """
    counts = per_axis(chart, grid)
    vals = np.asarray(values, dtype=float).reshape(counts)
    finite = np.isfinite(vals)
    mag = np.where(finite, np.abs(vals), np.inf)
    lowest = ndimage.minimum_filter(mag, size=3, mode="nearest")
    highest = ndimage.maximum_filter(np.where(finite, mag, -np.inf), size=3, mode="nearest")
    sign = np.where(finite, np.sign(vals), 0.0)
    mixed = (ndimage.minimum_filter(sign, size=3, mode="nearest") < 0) & (
        ndimage.maximum_filter(sign, size=3, mode="nearest") > 0
    )
    mask = finite & (mag <= lowest) & (mag <= ratio * highest) & ~mixed
    return mask.ravel()


def descend_to_zero(
    fn: Callable[[np.ndarray], np.ndarray],
    chart: Chart,
    starts: np.ndarray,
    radius: np.ndarray,
    zero_tol: float,
    max_iter: int = 100,
) -> np.ndarray:
    """
    Batched Gauss-Newton descent of f^2 from every start.

    Iterates stay within `radius` of their start and inside the box; a run
    stops when f no longer decreases. Returns the distinct end points with
    |f| < zero_tol.
    """
    x = np.array(starts, dtype=float).reshape(-1, chart.dim)
    if x.shape[0] == 0:
        return x
    lo = np.maximum(x - radius, chart.lower)
    hi = np.minimum(x + radius, chart.upper)
    h = 1e-7 * (chart.upper - chart.lower)
    fx = np.asarray(fn(x), dtype=float)
    with np.errstate(invalid="ignore"):
        active = np.isfinite(fx) & (fx != 0.0)

    for _ in range(max_iter):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        xa, fa = x[idx], fx[idx]
        grad = np.empty_like(xa)
        for k in range(chart.dim):
            e = np.zeros(chart.dim)
            e[k] = h[k]
            grad[:, k] = (fn(xa + e) - fn(xa - e)) / (2.0 * h[k])
        g2 = np.sum(grad * grad, axis=1)
        ok = np.isfinite(g2) & (g2 > 0)
        step = np.zeros_like(xa)
        step[ok] = (fa[ok] / g2[ok])[:, None] * grad[ok]
        xn = np.clip(xa - step, lo[idx], hi[idx])
        fnew = np.asarray(fn(xn), dtype=float)
        with np.errstate(invalid="ignore"):
            better = ok & np.isfinite(fnew) & (np.abs(fnew) < np.abs(fa))
        x[idx[better]] = xn[better]
        fx[idx[better]] = fnew[better]
        active[idx] = better & (fnew != 0.0)

    with np.errstate(invalid="ignore"):
        hit = x[np.abs(fx) < zero_tol]
    if hit.shape[0] == 0:
        return hit
    _, first = np.unique(np.round(hit, 9), axis=0, return_index=True)
    return hit[np.sort(first)]
