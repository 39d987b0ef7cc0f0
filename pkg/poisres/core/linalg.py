"""
Pfaffians, even ranks and small symbolic determinants.

Numeric Pfaffians are signed in every dimension: recursive row expansion
up to dimension 6 (vectorised over stacks of matrices), Parlett-Reid
tridiagonalisation with pivoting above that.
"""

from typing import List, Sequence, Tuple

import numpy as np

from .calculus import simplify
from .errors import DimensionError
from .expr import ONE, ZERO, Add, Expr, Mul, Sub, is_const

EXPANSION_MAX_DIM = 6


def _check_even_square(shape: Tuple[int, ...]) -> int:
    if len(shape) < 2 or shape[-1] != shape[-2]:
        raise DimensionError(f"expected square matrices, got shape {shape}")
    n = shape[-1]
    if n % 2:
        raise DimensionError(f"Pfaffian needs an even dimension, got {n}")
    return n


def _expand(a: np.ndarray, idx: List[int]) -> np.ndarray:
    if not idx:
        return np.ones(a.shape[:-2])
    i = idx[0]
    total = np.zeros(a.shape[:-2])
    for pos, j in enumerate(idx[1:]):
        rest = idx[1 : pos + 1] + idx[pos + 2 :]
        term = a[..., i, j] * _expand(a, rest)
        total = total + term if pos % 2 == 0 else total - term
    return total


def _parlett_reid(matrix: np.ndarray) -> float:
    a = np.array(matrix, dtype=float, copy=True)
    if not np.all(np.isfinite(a)):
        return float("nan")
    n = a.shape[0]
    pf = 1.0
    for k in range(0, n - 1, 2):
        # pivot the largest entry of column k into row k+1
        kp = k + 1 + int(np.argmax(np.abs(a[k + 1 :, k])))
        if kp != k + 1:
            a[[k + 1, kp], :] = a[[kp, k + 1], :]
            a[:, [k + 1, kp]] = a[:, [kp, k + 1]]
            pf = -pf
        if a[k + 1, k] == 0.0:
            return 0.0
        pf *= a[k, k + 1]
        if k + 2 < n:
            tau = a[k, k + 2 :] / a[k, k + 1]
            a[k + 2 :, k + 2 :] += np.outer(tau, a[k + 2 :, k + 1])
            a[k + 2 :, k + 2 :] -= np.outer(a[k + 2 :, k + 1], tau)
    return pf


def pfaffian_batch(stack: np.ndarray) -> np.ndarray:
    """Signed Pfaffian of every matrix in an (..., n, n) stack."""
    stack = np.asarray(stack, dtype=float)
    n = _check_even_square(stack.shape)
    if n <= EXPANSION_MAX_DIM:
        return _expand(stack, list(range(n)))
    flat = stack.reshape(-1, n, n)
    out = np.array([_parlett_reid(m) for m in flat])
    return out.reshape(stack.shape[:-2])


def pfaffian(matrix: np.ndarray) -> float:
    return float(pfaffian_batch(np.asarray(matrix, dtype=float)[None, ...])[0])


def even_rank(singular_values: np.ndarray, rel_threshold: float) -> int:
    """
    Numeric rank of an antisymmetric matrix, forced even.

    A singular value counts when it is >= rel_threshold * max(1, s_max);
    singular values of antisymmetric matrices come in pairs, so an odd
    count is rounded down.
    """
    s = np.asarray(singular_values, dtype=float)
    if s.size == 0:
        return 0
    cutoff = rel_threshold * max(1.0, float(np.max(s)))
    count = int(np.count_nonzero(s >= cutoff)) if np.max(s) > 0 else 0
    return count - (count % 2)


def singular_values_batch(stack: np.ndarray) -> np.ndarray:
    return np.linalg.svd(np.asarray(stack, dtype=float), compute_uv=False)


# ----------------------------
# Symbolic
# ----------------------------

def _sum(terms: Sequence[Tuple[int, Expr]]) -> Expr:
    out: Expr = ZERO
    for sign, term in terms:
        out = Add(out, term) if sign > 0 else Sub(out, term)
    return out


def _pfaffian_expr(m: Sequence[Sequence[Expr]], idx: List[int]) -> Expr:
    if not idx:
        return ONE
    i = idx[0]
    terms = []
    for pos, j in enumerate(idx[1:]):
        entry = m[i][j]
        if is_const(entry, 0.0):
            continue
        rest = idx[1 : pos + 1] + idx[pos + 2 :]
        terms.append((1 if pos % 2 == 0 else -1, Mul(entry, _pfaffian_expr(m, rest))))
    return _sum(terms)


def pfaffian_expr(m: Sequence[Sequence[Expr]]) -> Expr:
    """Pfaffian of an antisymmetric matrix of expressions (any even size)."""
    n = len(m)
    _check_even_square((n, len(m[0]) if n else 0))
    return simplify(_pfaffian_expr(m, list(range(n))))


def _determinant_expr(m: Sequence[Sequence[Expr]], rows: List[int], cols: List[int]) -> Expr:
    if len(rows) == 1:
        return m[rows[0]][cols[0]]
    r = rows[0]
    terms = []
    for pos, c in enumerate(cols):
        entry = m[r][c]
        if is_const(entry, 0.0):
            continue
        minor = _determinant_expr(m, rows[1:], cols[:pos] + cols[pos + 1 :])
        terms.append((1 if pos % 2 == 0 else -1, Mul(entry, minor)))
    return _sum(terms)


def determinant_expr(m: Sequence[Sequence[Expr]]) -> Expr:
    """Laplace expansion along the first row; exact, for small square matrices."""
    n = len(m)
    if n == 0 or any(len(row) != n for row in m):
        raise DimensionError("determinant needs a non-empty square matrix")
    return simplify(_determinant_expr(m, list(range(n)), list(range(n))))
