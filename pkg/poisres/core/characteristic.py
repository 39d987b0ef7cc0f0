"""
Characteristic equation du/dp = f(u, v0) along a vertical line.

For a map (u, v) resolving {x,y} = f with {p,q} = 1 and v = v0 constant,
u solves this ODE in p. When f = x g(x, y), u = 0 is a solution, so by
uniqueness a trajectory started at u0 = 0 never leaves the line x = 0.
"""

import math
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import UnknownVariableError
from .expr import Expr, evaluate_batch, free_variables
from .utils import json_float

MAX_SAMPLES = 1000


@dataclass(frozen=True)
class OdeTrace:
    """
    One fixed-step RK4 trajectory.

    Invariants:
    - p and u are aligned and stop at the last finite state
    - blew_up and truncated are mutually exclusive
    """
    v0: float
    u0: float
    step: float
    p: np.ndarray
    u: np.ndarray
    max_abs_u: float
    blew_up: bool
    blowup_p: Optional[float]
    truncated: bool
    truncated_p: Optional[float]

    @property
    def final_u(self) -> float:
        return float(self.u[-1])

    def to_dict(self) -> dict:
        return {
            "v0": json_float(self.v0),
            "u0": json_float(self.u0),
            "step": json_float(self.step),
            "samples": int(self.p.size),
            "final_p": json_float(float(self.p[-1])),
            "final_u": json_float(self.final_u),
            "max_abs_u": json_float(self.max_abs_u),
            "blew_up": self.blew_up,
            "blowup_p": json_float(self.blowup_p),
            "truncated": self.truncated,
            "truncated_p": json_float(self.truncated_p),
        }


def characteristic_ode_family(
    f: Expr,
    v0s: Sequence[float],
    u0s: Sequence[float],
    p_span: Tuple[float, float] = (0.0, 10.0),
    step: float = 1e-3,
    blowup: float = 1e9,
    coords: Tuple[str, str] = ("x", "y"),
) -> List[OdeTrace]:
    """
    Batched RK4 for du/dp = f(u, v0) over every (v0, u0) pair.

    A trajectory stops with blew_up when |u| exceeds `blowup`, and with
    truncated when f is undefined at a stage point.
    """
    if step <= 0:
        raise ValueError("step must be > 0")
    extra = free_variables(f) - set(coords)
    if extra:
        raise UnknownVariableError(extra, coords)
    xname, yname = coords
    v0 = np.asarray(v0s, dtype=float)
    u = np.asarray(u0s, dtype=float)
    v0, u = np.broadcast_arrays(v0, u)
    v0 = v0.astype(float).ravel()
    u = u.astype(float).ravel().copy()
    n = u.size

    p0, p1 = float(p_span[0]), float(p_span[1])
    span = p1 - p0
    n_steps = max(1, int(math.ceil(abs(span) / step - 1e-9)))
    h = span / n_steps
    stride = max(1, n_steps // MAX_SAMPLES)

    def rhs(uu: np.ndarray) -> np.ndarray:
        return np.broadcast_to(evaluate_batch(f, {xname: uu, yname: v0}), (n,))

    alive = np.ones(n, dtype=bool)
    max_abs = np.abs(u)
    blew = np.zeros(n, dtype=bool)
    trunc = np.zeros(n, dtype=bool)
    stop_p = np.full(n, np.nan)
    last_k = np.zeros(n, dtype=int)
    samples_p = [p0]
    samples_u = [u.copy()]

    for k in range(n_steps):
        if not alive.any():
            break
        with np.errstate(all="ignore"):
            k1 = rhs(u)
            a2 = u + 0.5 * h * k1
            k2 = rhs(a2)
            a3 = u + 0.5 * h * k2
            k3 = rhs(a3)
            a4 = u + h * k3
            k4 = rhs(a4)
            u_new = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            stages = np.abs(np.stack([a2, a3, a4, u_new]))
            stage_max = np.max(np.where(np.isnan(stages), 0.0, stages), axis=0)

        p_next = p0 + (k + 1) * h
        finite = np.isfinite(u_new)
        big = finite & (np.abs(u_new) > blowup)
        runaway = ~finite & (stage_max > blowup)
        undefined = ~finite & ~runaway

        newly_blown = alive & (big | runaway)
        newly_trunc = alive & undefined
        blew |= newly_blown
        trunc |= newly_trunc
        stop_p[newly_blown | newly_trunc] = p_next
        alive &= ~(newly_blown | newly_trunc)

        u = np.where(alive, u_new, u)
        reached = np.where(finite, np.abs(u_new), np.inf)
        max_abs = np.where(alive | newly_blown, np.maximum(max_abs, reached), max_abs)
        last_k = np.where(alive, k + 1, last_k)
        if (k + 1) % stride == 0 or k + 1 == n_steps:
            samples_p.append(p_next)
            samples_u.append(u.copy())

    ps = np.asarray(samples_p)
    us = np.stack(samples_u, axis=0)
    traces = []
    for i in range(n):
        end_p = p0 + last_k[i] * h
        # keep samples up to the last finite state of this trajectory
        keep = (ps - end_p) * np.sign(h) <= 1e-12 * (1.0 + abs(end_p))
        p_i = ps[keep]
        u_i = us[keep, i]
        if p_i[-1] != end_p:
            p_i = np.append(p_i, end_p)
            u_i = np.append(u_i, u[i])
        traces.append(
            OdeTrace(
                v0=float(v0[i]),
                u0=float(samples_u[0][i]),
                step=float(abs(h)),
                p=p_i,
                u=u_i,
                max_abs_u=float(max_abs[i]),
                blew_up=bool(blew[i]),
                blowup_p=float(stop_p[i]) if blew[i] else None,
                truncated=bool(trunc[i]),
                truncated_p=float(stop_p[i]) if trunc[i] else None,
            )
        )
    return traces


def characteristic_ode_trace(
    f: Expr,
    v0: float,
    u0: float,
    p_span: Tuple[float, float] = (0.0, 10.0),
    step: float = 1e-3,
    blowup: float = 1e9,
    coords: Tuple[str, str] = ("x", "y"),
) -> OdeTrace:
    return characteristic_ode_family(f, [v0], [u0], p_span, step, blowup, coords)[0]
