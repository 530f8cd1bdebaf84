"""Orthonormal Legendre chaos basis of total degree <= k in two variables.

The variables are uniform on [-sqrt(3), sqrt(3)] (zero mean, unit variance).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import InvalidParameterError

SQRT3 = math.sqrt(3.0)


def recurrence_coeff(n: int) -> float:
    """c_n in  y p_n = c_{n+1} p_{n+1} + c_n p_{n-1}."""
    if n <= 0:
        return 0.0
    return SQRT3 * n / math.sqrt((2 * n - 1) * (2 * n + 1))


def total_degree_indices(k: int) -> list[tuple[int, int]]:
    """Multi-indices by total degree, then by decreasing first component."""
    return [(d - a2, a2) for d in range(k + 1) for a2 in range(d + 1)]


def legendre_1d(y, k: int) -> np.ndarray:
    """Orthonormal Legendre values p_0..p_k at ``y``; shape ``y.shape + (k+1,)``."""
    y = np.asarray(y, dtype=float)
    out = np.empty(y.shape + (k + 1,))
    out[..., 0] = 1.0
    if k >= 1:
        out[..., 1] = y
    for n in range(1, k):
        out[..., n + 1] = (y * out[..., n] - recurrence_coeff(n) * out[..., n - 1]) / recurrence_coeff(n + 1)
    return out


@dataclass(frozen=True, eq=False)
class PceBasis:
    k: int
    indices: tuple[tuple[int, int], ...]
    G1: sp.csr_matrix
    G2: sp.csr_matrix

    def __post_init__(self):
        object.__setattr__(self, "_a1", np.array([i[0] for i in self.indices], dtype=np.intp))
        object.__setattr__(self, "_a2", np.array([i[1] for i in self.indices], dtype=np.intp))
        object.__setattr__(self, "_c", [recurrence_coeff(n) for n in range(self.k + 2)])

    @property
    def n_k(self) -> int:
        return len(self.indices)

    def __call__(self, y) -> np.ndarray:
        return eval_basis(self, y)


def _coupling(indices, m: int) -> sp.csr_matrix:
    pos = {idx: j for j, idx in enumerate(indices)}
    rows, cols, vals = [], [], []
    for j, idx in enumerate(indices):
        up = list(idx)
        up[m] += 1
        s = pos.get(tuple(up))
        if s is not None:
            c = recurrence_coeff(up[m])
            rows += [j, s]
            cols += [s, j]
            vals += [c, c]
    n = len(indices)
    return sp.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def build_basis(k: int) -> PceBasis:
    if int(k) != k or k < 0:
        raise InvalidParameterError(f"polynomial degree must be a non-negative integer, got {k!r}")
    k = int(k)
    indices = tuple(total_degree_indices(k))
    return PceBasis(k=k, indices=indices, G1=_coupling(indices, 0), G2=_coupling(indices, 1))


def eval_basis(basis: PceBasis, y) -> np.ndarray:
    """Values of all basis polynomials at ``y``.

    ``y`` is a point ``(y1, y2)`` or an array of points with shape (..., 2);
    the result has shape (..., n_k).
    """
    if len(y) == 2 and np.ndim(y[0]) == 0:
        return _eval_point(basis, float(y[0]), float(y[1]))
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != 2:
        raise InvalidParameterError("parameter points must have two components")
    if not np.all(np.isfinite(y)):
        raise InvalidParameterError("non-finite parameter point")
    p1 = legendre_1d(y[..., 0], basis.k)
    p2 = legendre_1d(y[..., 1], basis.k)
    return p1[..., basis._a1] * p2[..., basis._a2]


def _eval_point(basis: PceBasis, y1: float, y2: float) -> np.ndarray:
    # scalar recurrence; this sits in the sampler's inner loop
    if not (math.isfinite(y1) and math.isfinite(y2)):
        raise InvalidParameterError("non-finite parameter point")
    c = basis._c
    p1 = [1.0, y1]
    p2 = [1.0, y2]
    for n in range(1, basis.k):
        p1.append((y1 * p1[n] - c[n] * p1[n - 1]) / c[n + 1])
        p2.append((y2 * p2[n] - c[n] * p2[n - 1]) / c[n + 1])
    return np.array(p1)[basis._a1] * np.array(p2)[basis._a2]
