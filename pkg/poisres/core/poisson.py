from dataclasses import dataclass, field
from functools import cached_property
from itertools import combinations
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from .calculus import differentiate, simplify
from .chart import Chart
from .errors import DimensionError, UnknownVariableError
from .expr import ZERO, Add, Expr, Mul, Neg, Sub, evaluate, evaluate_batch, free_variables
from .identity import draw_defined_samples
from .linalg import even_rank, pfaffian_batch, pfaffian_expr, singular_values_batch
from .linalg import pfaffian as numeric_pfaffian
from .parser import parse
from .utils import json_float, json_point

Pair = Tuple[int, int]

DEFAULT_RANK_THRESHOLD = 1e-8


def _check_variables(e: Expr, chart: Chart) -> None:
    extra = free_variables(e) - set(chart.coords)
    if extra:
        raise UnknownVariableError(extra, chart.coords)


@dataclass(frozen=True)
class PoissonStructure:
    """
    Bivector pi on a chart, stored as its upper triangle.

    Invariants:
    - only i<j entries are stored; pi^ji = -pi^ij and pi^ii = 0 are implied
    - every pair i<j has an entry (omitted brackets are 0)
    - entries only use the chart's coordinates
    """
    chart: Chart
    upper: Dict[Pair, Expr] = field(default_factory=dict)

    def __post_init__(self) -> None:
        n = self.chart.dim
        full: Dict[Pair, Expr] = {}
        for (i, j), e in self.upper.items():
            if not (0 <= i < j < n):
                raise DimensionError(f"bracket index ({i},{j}) must satisfy 0 <= i < j < {n}")
            _check_variables(e, self.chart)
            full[(i, j)] = e
        for pair in combinations(range(n), 2):
            full.setdefault(pair, ZERO)
        object.__setattr__(self, "upper", dict(sorted(full.items())))

    @staticmethod
    def from_brackets(
        chart: Chart, brackets: Mapping[Tuple[str, str], Union[str, Expr]]
    ) -> "PoissonStructure":
        """
        Build from {(a, b): expr} with coordinate names.

        A pair given as (b, a) with a before b in the chart stores -expr.
        """
        index = {name: k for k, name in enumerate(chart.coords)}
        upper: Dict[Pair, Expr] = {}
        for (a, b), value in brackets.items():
            if a not in index or b not in index:
                raise UnknownVariableError({a, b} - set(index), chart.coords)
            e = parse(value) if isinstance(value, str) else value
            i, j = index[a], index[b]
            if i == j:
                raise DimensionError(f"bracket {{{a},{a}}} is identically 0 and cannot be set")
            if i > j:
                i, j, e = j, i, simplify(Neg(e))
            upper[(i, j)] = e
        return PoissonStructure(chart, upper)

    @property
    def dim(self) -> int:
        return self.chart.dim

    def entry(self, i: int, j: int) -> Expr:
        if i == j:
            return ZERO
        if i < j:
            return self.upper[(i, j)]
        return simplify(Neg(self.upper[(j, i)]))

    def matrix_exprs(self) -> List[List[Expr]]:
        return [[self.entry(i, j) for j in range(self.dim)] for i in range(self.dim)]

    @cached_property
    def pfaffian_expr(self) -> Expr:
        return pfaffian_expr(self.matrix_exprs())

    @cached_property
    def pfaffian_gradient(self) -> Tuple[Expr, ...]:
        pf = pfaffian(self)
        return tuple(differentiate(pf, name) for name in self.chart.coords)

    @cached_property
    def pfaffian_hessian(self) -> Tuple[Tuple[Expr, ...], ...]:
        grad = self.pfaffian_gradient
        return tuple(
            tuple(differentiate(g, name) for name in self.chart.coords) for g in grad
        )

    def to_dict(self) -> dict:
        c = self.chart.coords
        return {
            "chart": self.chart.to_dict(),
            "brackets": {f"{c[i]},{c[j]}": str(e) for (i, j), e in self.upper.items()},
        }


@dataclass(frozen=True)
class PointRank:
    point: Dict[str, float]
    rank: int
    singular_values: Tuple[float, ...]

    def to_dict(self) -> dict:
        return {
            "point": json_point(self.point),
            "rank": self.rank,
            "singular_values": [json_float(s) for s in self.singular_values],
        }


@dataclass(frozen=True)
class JacobiVerdict:
    """
    Result of the sampled Jacobi check.

    Invariants:
    - passed=False implies triple and witness are set
    """
    passed: bool
    worst_gap: float
    samples: int
    triple: Optional[Tuple[str, str, str]] = None
    witness: Optional[Dict[str, float]] = None

    def to_dict(self) -> dict:
        return {
            "passed": self.passed,
            "worst_gap": json_float(self.worst_gap),
            "samples": self.samples,
            "triple": list(self.triple) if self.triple else None,
            "witness": json_point(self.witness),
        }


# ----------------------------
# Brackets
# ----------------------------

def bracket(P: PoissonStructure, f: Expr, g: Expr) -> Expr:
    """{f,g} = sum_{i<j} pi^ij (d_i f d_j g - d_j f d_i g), simplified."""
    _check_variables(f, P.chart)
    _check_variables(g, P.chart)
    names = P.chart.coords
    df = [differentiate(f, v) for v in names]
    dg = [differentiate(g, v) for v in names]
    out: Expr = ZERO
    for (i, j), pij in P.upper.items():
        cross = Sub(Mul(df[i], dg[j]), Mul(df[j], dg[i]))
        out = Add(out, Mul(pij, simplify(cross)))
    return simplify(out)


def jacobiator_terms(P: PoissonStructure, i: int, j: int, k: int) -> List[Expr]:
    if not (0 <= i < j < k < P.dim):
        raise DimensionError(f"jacobiator needs 0 <= i < j < k < {P.dim}, got ({i},{j},{k})")
    names = P.chart.coords
    terms: List[Expr] = []
    for a, b, c in ((i, j, k), (j, k, i), (k, i, j)):
        target = P.entry(b, c)
        for m, name in enumerate(names):
            term = simplify(Mul(P.entry(a, m), differentiate(target, name)))
            if term != ZERO:
                terms.append(term)
    return terms


def jacobiator(P: PoissonStructure, i: int, j: int, k: int) -> Expr:
    """J^ijk = sum_l (pi^il d_l pi^jk + pi^jl d_l pi^ki + pi^kl d_l pi^ij)."""
    out: Expr = ZERO
    for term in jacobiator_terms(P, i, j, k):
        out = Add(out, term)
    return simplify(out)


def verify_jacobi(
    P: PoissonStructure,
    n_samples: int = 256,
    tol: float = 1e-9,
    seed: int = 42,
) -> JacobiVerdict:
    """
    Sampled Jacobi identity on the chart box.

    A component passes at a sample when |J| <= tol * (1 + sum of |terms|).
    """
    triples = list(combinations(range(P.dim), 3))
    per_triple = [(t, jacobiator_terms(P, *t)) for t in triples]
    per_triple = [(t, terms) for t, terms in per_triple if terms]
    if not per_triple:
        return JacobiVerdict(passed=True, worst_gap=0.0, samples=0)

    all_terms = tuple(term for _, terms in per_triple for term in terms)
    rng = np.random.default_rng(seed)
    env, values = draw_defined_samples(all_terms, P.chart.box_dict(), n_samples, rng)

    names = P.chart.coords
    worst = 0.0
    cursor = 0
    first_fail: Optional[Tuple[int, Tuple[int, int, int]]] = None
    for t, terms in per_triple:
        block = np.stack(values[cursor : cursor + len(terms)])
        cursor += len(terms)
        total = block.sum(axis=0)
        scale = 1.0 + np.abs(block).sum(axis=0)
        gaps = np.abs(total)
        worst = max(worst, float(gaps.max()))
        bad = np.flatnonzero(gaps > tol * scale)
        if bad.size and (first_fail is None or bad[0] < first_fail[0]):
            first_fail = (int(bad[0]), t)

    if first_fail is None:
        return JacobiVerdict(passed=True, worst_gap=worst, samples=n_samples)
    k, t = first_fail
    return JacobiVerdict(
        passed=False,
        worst_gap=worst,
        samples=n_samples,
        triple=tuple(names[x] for x in t),
        witness={name: float(col[k]) for name, col in env.items()},
    )


# ----------------------------
# Pointwise linear algebra
# ----------------------------

def matrix_at(P: PoissonStructure, point: Mapping[str, float]) -> np.ndarray:
    P.chart.warn_if_outside(point)
    n = P.dim
    out = np.zeros((n, n))
    for (i, j), e in P.upper.items():
        v = evaluate(e, point)
        out[i, j] = v
        out[j, i] = -v
    return out


def matrix_batch(P: PoissonStructure, points: np.ndarray) -> np.ndarray:
    """(N, n, n) matrices; NaN entries where an entry is undefined."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    env = P.chart.env(points)
    n = P.dim
    out = np.zeros((points.shape[0], n, n))
    for (i, j), e in P.upper.items():
        v = np.broadcast_to(evaluate_batch(e, env), (points.shape[0],))
        out[:, i, j] = v
        out[:, j, i] = -v
    return out


def rank_at(
    P: PoissonStructure,
    point: Mapping[str, float],
    rel_threshold: float = DEFAULT_RANK_THRESHOLD,
) -> PointRank:
    m = matrix_at(P, point)
    s = singular_values_batch(m)
    return PointRank(
        point={name: float(point[name]) for name in P.chart.coords},
        rank=even_rank(s, rel_threshold),
        singular_values=tuple(float(x) for x in s),
    )


def _ranks_and_svs(
    P: PoissonStructure, points: np.ndarray, rel_threshold: float
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    mats = matrix_batch(P, points)
    ok = np.all(np.isfinite(mats), axis=(1, 2))
    ranks = np.full(mats.shape[0], -1, dtype=int)
    svs = np.full((mats.shape[0], P.dim), np.nan)
    if ok.any():
        svs[ok] = singular_values_batch(mats[ok])
        ranks[ok] = [even_rank(s, rel_threshold) for s in svs[ok]]
    return ranks, svs, ok


def rank_values(
    P: PoissonStructure,
    points: np.ndarray,
    rel_threshold: float = DEFAULT_RANK_THRESHOLD,
) -> np.ndarray:
    """Even rank at each row of an (N, dim) array; -1 where pi is undefined."""
    return _ranks_and_svs(P, points, rel_threshold)[0]


def ranks_at(
    P: PoissonStructure,
    points: np.ndarray,
    rel_threshold: float = DEFAULT_RANK_THRESHOLD,
) -> List[PointRank]:
    """Batched rank_at over an (N, dim) array; undefined points are dropped."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[0] == 0:
        return []
    ranks, svs, ok = _ranks_and_svs(P, points, rel_threshold)
    return [
        PointRank(
            point=P.chart.point(row),
            rank=int(r),
            singular_values=tuple(float(x) for x in s),
        )
        for row, r, s in zip(points[ok], ranks[ok], svs[ok])
    ]


def pfaffian(P: PoissonStructure) -> Expr:
    """Symbolic Pfaffian of pi; raises DimensionError in odd dimension."""
    if P.dim % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, chart has {P.dim}")
    return P.pfaffian_expr


def pfaffian_at(P: PoissonStructure, point: Mapping[str, float]) -> float:
    if P.dim % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, chart has {P.dim}")
    return numeric_pfaffian(matrix_at(P, point))


def pfaffian_values(P: PoissonStructure, points: np.ndarray) -> np.ndarray:
    """Pfaffian at each row of an (N, dim) array; NaN where undefined."""
    if P.dim % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, chart has {P.dim}")
    return pfaffian_batch(matrix_batch(P, points))


def gradient_values(exprs: Sequence[Expr], chart: Chart, points: np.ndarray) -> np.ndarray:
    """(N, len(exprs)) values of a list of expressions at the rows of points."""
    env = chart.env(np.atleast_2d(points))
    n = np.atleast_2d(points).shape[0]
    return np.stack([np.broadcast_to(evaluate_batch(e, env), (n,)) for e in exprs], axis=-1)


def hamiltonian_vector_field(P: PoissonStructure, f: Expr) -> Tuple[Expr, ...]:
    """X_f^i = sum_j pi^ij d_j f."""
    _check_variables(f, P.chart)
    df = [differentiate(f, name) for name in P.chart.coords]
    out = []
    for i in range(P.dim):
        acc: Expr = ZERO
        for j in range(P.dim):
            acc = Add(acc, Mul(P.entry(i, j), df[j]))
        out.append(simplify(acc))
    return tuple(out)
