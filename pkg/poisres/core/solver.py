"""
Batched multi-start damped least squares for preimage search.

Every (target point, start) pair is an independent problem
min |phi(s) - t|^2 over the piece box. All problems advance together as
numpy stacks; iterates are clipped to the box after each step.
"""

import math
from dataclasses import dataclass
from typing import Callable, Tuple

import numpy as np

from .chart import Chart, grid_points

# (x, rows) -> values; rows index the problems x belongs to
ResidualFn = Callable[[np.ndarray, np.ndarray], np.ndarray]
JacobianFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class SolverConfig:
    starts: int = 8
    iterations: int = 100
    tol: float = 1e-8
    lattice_points: int = 4096
    tau: float = 1e-3

    def to_dict(self) -> dict:
        return {
            "starts": self.starts,
            "iterations": self.iterations,
            "tol": self.tol,
            "lattice_points": self.lattice_points,
            "tau": self.tau,
        }


def levenberg_marquardt(
    residual: ResidualFn,
    jacobian: JacobianFn,
    x0: np.ndarray,
    lower: np.ndarray,
    upper: np.ndarray,
    iterations: int = 100,
    tol: float = 1e-8,
    tau: float = 1e-3,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Projected Levenberg-Marquardt on a stack of problems.

    residual maps (x, rows) with x of shape (M, d) to (M, k), jacobian to
    (M, k, d); rows are the problem indices of the rows of x.
    Returns (x, |r(x)|); problems stop moving once |r| < tol. Undefined
    residuals (NaN) never replace a defined iterate.
    """
    x = np.clip(np.array(x0, dtype=float), lower, upper)
    m, d = x.shape
    everything = np.arange(m)
    r = residual(x, everything)
    norm = np.linalg.norm(r, axis=1)
    norm[~np.isfinite(norm)] = np.inf

    jac = jacobian(x, everything)
    hess = np.einsum("mki,mkj->mij", jac, jac)
    diag = np.diagonal(hess, axis1=1, axis2=2)
    mu = tau * np.maximum(np.max(np.where(np.isfinite(diag), diag, 0.0), axis=1), 1e-12)
    nu = np.full(m, 2.0)
    eye = np.eye(d)

    for _ in range(int(iterations)):
        active = np.isfinite(norm) & (norm >= tol)
        if not active.any():
            break
        ja = jac[active]
        ra = r[active]
        ha = hess[active]
        grad = np.einsum("mki,mk->mi", ja, ra)
        lhs = ha + mu[active, None, None] * eye
        bad = ~np.all(np.isfinite(lhs), axis=(1, 2)) | ~np.all(np.isfinite(grad), axis=1)
        lhs[bad] = eye
        grad[bad] = 0.0
        step = np.linalg.solve(lhs, -grad[..., None])[..., 0]

        xa = x[active]
        x_new = np.clip(xa + step, lower, upper)
        taken = x_new - xa
        idx = np.flatnonzero(active)
        r_new = residual(x_new, idx)
        norm_new = np.linalg.norm(r_new, axis=1)

        predicted_res = ra + np.einsum("mki,mi->mk", ja, taken)
        predicted = norm[active] ** 2 - np.sum(predicted_res**2, axis=1)
        actual = norm[active] ** 2 - norm_new**2
        with np.errstate(divide="ignore", invalid="ignore"):
            rho = np.where(predicted > 0, actual / predicted, -1.0)
        accept = np.isfinite(norm_new) & (rho > 0)

        acc = idx[accept]
        rej = idx[~accept]
        if acc.size:
            x[acc] = x_new[accept]
            r[acc] = r_new[accept]
            norm[acc] = norm_new[accept]
            jac[acc] = jacobian(x[acc], acc)
            hess[acc] = np.einsum("mki,mkj->mij", jac[acc], jac[acc])
            rho_acc = rho[accept]
            mu[acc] *= np.maximum(1.0 / 3.0, 1.0 - (2.0 * rho_acc - 1.0) ** 3)
            nu[acc] = 2.0
        if rej.size:
            mu[rej] *= nu[rej]
            nu[rej] *= 2.0
        # keep damping finite for problems stuck on a flat residual
        np.minimum(mu, 1e16, out=mu)

    return x, norm


def lattice_size(dim: int, points: int) -> int:
    return max(3, int(math.ceil(points ** (1.0 / dim))))


def nearest_image_starts(
    lattice: np.ndarray,
    images: np.ndarray,
    targets: np.ndarray,
    count: int,
    chunk: int = 256,
) -> np.ndarray:
    """For every target, the `count` lattice points whose images lie closest: (K, count, d)."""
    finite = np.all(np.isfinite(images), axis=1)
    lattice = lattice[finite]
    images = images[finite]
    k = targets.shape[0]
    d = lattice.shape[1]
    if lattice.shape[0] == 0 or count == 0:
        return np.empty((k, 0, d))
    count = min(count, lattice.shape[0])
    out = np.empty((k, count, d))
    for lo in range(0, k, chunk):
        block = targets[lo : lo + chunk]
        dist = np.sum((block[:, None, :] - images[None, :, :]) ** 2, axis=-1)
        near = np.argpartition(dist, count - 1, axis=1)[:, :count]
        # order by distance, ties by lattice index
        order = np.lexsort((near, np.take_along_axis(dist, near, axis=1)), axis=1)
        out[lo : lo + chunk] = lattice[np.take_along_axis(near, order, axis=1)]
    return out


def source_lattice(chart: Chart, points: int) -> np.ndarray:
    """Regular lattice of roughly `points` nodes over the chart box."""
    return grid_points(chart, lattice_size(chart.dim, points))
