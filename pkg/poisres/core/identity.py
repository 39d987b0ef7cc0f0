"""
Randomized identity testing.

equivalent() is probabilistic: it samples seeded uniform points in a box
and compares both sides with the hybrid tolerance |a-b| <= tol*(1+|a|).
A pass means "no counterexample among n samples", nothing stronger.
"""

from dataclasses import dataclass
from typing import Dict, Mapping, Tuple, Union

import numpy as np

from .errors import DomainError, UnknownVariableError
from .expr import Expr, evaluate_batch, free_variables
from .utils import json_float, json_point

Box = Mapping[str, Tuple[float, float]]


@dataclass(frozen=True)
class Equivalent:
    samples: int

    @property
    def ok(self) -> bool:
        return True

    def to_dict(self) -> dict:
        return {"status": "Equivalent", "samples": self.samples}


@dataclass(frozen=True)
class NotEquivalent:
    witness: Dict[str, float]
    gap: float

    @property
    def ok(self) -> bool:
        return False

    def to_dict(self) -> dict:
        return {
            "status": "NotEquivalent",
            "witness": json_point(self.witness),
            "gap": json_float(self.gap),
        }


def draw_defined_samples(
    exprs: Tuple[Expr, ...],
    box: Box,
    n: int,
    rng: np.random.Generator,
) -> Tuple[Dict[str, np.ndarray], Tuple[np.ndarray, ...]]:
    """
    n seeded uniform points of the box where every expression is defined.

    Points are drawn in rounds of n; undefined points are skipped. Raises
    DomainError when 10*n draws do not produce n defined points.
    """
    names = list(box)
    kept_env: Dict[str, list] = {name: [] for name in names}
    kept_vals: list = [[] for _ in exprs]
    have = 0
    drawn = 0
    while have < n and drawn < 10 * n:
        batch = min(n, 10 * n - drawn)
        env = {name: rng.uniform(box[name][0], box[name][1], size=batch) for name in names}
        drawn += batch
        vals = [np.broadcast_to(evaluate_batch(e, env), (batch,)) for e in exprs]
        defined = np.ones(batch, dtype=bool)
        for v in vals:
            defined &= np.isfinite(v)
        idx = np.flatnonzero(defined)[: n - have]
        for name in names:
            kept_env[name].append(env[name][idx])
        for k, v in enumerate(vals):
            kept_vals[k].append(v[idx])
        have += idx.size
    if have < n:
        raise DomainError(exprs[0] if len(exprs) == 1 else exprs, f"only {have} of {n} samples defined")
    env_out = {name: np.concatenate(parts) for name, parts in kept_env.items()}
    vals_out = tuple(np.concatenate(parts) for parts in kept_vals)
    return env_out, vals_out


def equivalent(
    e1: Expr,
    e2: Expr,
    box: Box,
    n: int = 64,
    tol: float = 1e-9,
    seed: int = 42,
) -> Union[Equivalent, NotEquivalent]:
    """
    Sampled equality test of two expressions on a box.

    Returns the first failing sample (in draw order) with its gap.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    missing = (free_variables(e1) | free_variables(e2)) - set(box)
    if missing:
        raise UnknownVariableError(missing, list(box))

    rng = np.random.default_rng(seed)
    env, (a, b) = draw_defined_samples((e1, e2), box, n, rng)
    gaps = np.abs(a - b)
    failing = np.flatnonzero(gaps > tol * (1.0 + np.abs(a)))
    if failing.size == 0:
        return Equivalent(samples=n)
    k = int(failing[0])
    witness = {name: float(col[k]) for name, col in env.items()}
    return NotEquivalent(witness=witness, gap=float(gaps[k]))
