"""Axisymmetric P1 finite element operators.

All integrals carry the radial weight r and omit the common factor 2*pi,
which cancels from the Galerkin equations and from the disc average.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import AssemblyError, InvalidParameterError
from .mesh import FACE, ExperimentGeometry, Mesh

logger = logging.getLogger(__name__)

_GAUSS2 = np.array([0.5 - 0.5 / math.sqrt(3.0), 0.5 + 0.5 / math.sqrt(3.0)])
# edge-midpoint rule in barycentric coordinates, exact for quadratics
_MIDPOINT_BARY = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])


@dataclass(frozen=True)
class MaterialProperties:
    rho: float
    c_p: float
    kappa: float
    T_a: float

    def __post_init__(self):
        for name in ("rho", "c_p", "T_a"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise InvalidParameterError(f"material.{name} must be finite and > 0, got {v!r}")
        if not (math.isfinite(self.kappa) and self.kappa >= 0):
            raise InvalidParameterError(f"material.kappa must be finite and >= 0, got {self.kappa!r}")

    @property
    def heat_capacity(self) -> float:
        """Volumetric heat capacity rho * c_p."""
        return self.rho * self.c_p


@dataclass(frozen=True)
class LaserProfile:
    """Radial laser profile: ``uniform`` or ``gaussian`` with width ``r_f``."""

    kind: str = "uniform"
    r_f: float | None = None

    def __post_init__(self):
        if self.kind not in ("uniform", "gaussian"):
            raise InvalidParameterError(f"unknown laser profile {self.kind!r}")
        if self.kind == "gaussian" and not (self.r_f is not None and math.isfinite(self.r_f)
                                            and self.r_f > 0):
            raise InvalidParameterError("gaussian laser profile needs r_f > 0")

    @classmethod
    def uniform(cls) -> "LaserProfile":
        return cls("uniform")

    @classmethod
    def gaussian(cls, r_f: float) -> "LaserProfile":
        return cls("gaussian", float(r_f))

    def chi(self, r):
        r = np.asarray(r, dtype=float)
        if self.kind == "uniform":
            return np.ones_like(r)
        return np.exp(-r ** 2 / (2.0 * self.r_f ** 2))


@dataclass(frozen=True, eq=False)
class FemOperators:
    """Sparse matrices and load vectors of the semi-discrete heat equation.

    M, K, Mb are unscaled (no rho*c_p, lambda or kappa); b is the face load
    for unit ambient temperature and f the source load for unit intensity.
    w maps nodal values to the top-face disc average.
    """

    M: sp.csr_matrix
    K: sp.csr_matrix
    Mb: sp.csr_matrix
    b: np.ndarray
    f: np.ndarray
    w: np.ndarray

    @property
    def n_h(self) -> int:
        return self.M.shape[0]


def _clip_below(poly: np.ndarray, axis: int, cut: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a polygon to ``x[axis] <= cut``."""
    out = []
    n = len(poly)
    for k in range(n):
        p, q = poly[k], poly[(k + 1) % n]
        p_in, q_in = p[axis] <= cut, q[axis] <= cut
        if p_in:
            out.append(p)
        if p_in != q_in:
            s = (cut - p[axis]) / (q[axis] - p[axis])
            out.append(p + s * (q - p))
    return np.array(out)


def _barycentric(tri: np.ndarray, pts: np.ndarray) -> np.ndarray:
    T = np.column_stack([tri[1] - tri[0], tri[2] - tri[0]])
    lam12 = np.linalg.solve(T, (pts - tri[0]).T).T
    return np.column_stack([1.0 - lam12.sum(axis=1), lam12])


def _clipped_source(tri: np.ndarray, z_cut: float, chi) -> np.ndarray:
    """Integral of chi(r) r phi_a over the part of one triangle with z <= z_cut."""
    poly = _clip_below(tri, 1, z_cut)
    load = np.zeros(3)
    for k in range(1, len(poly) - 1):
        sub = np.array([poly[0], poly[k], poly[k + 1]])
        area = 0.5 * abs((sub[1, 0] - sub[0, 0]) * (sub[2, 1] - sub[0, 1])
                         - (sub[2, 0] - sub[0, 0]) * (sub[1, 1] - sub[0, 1]))
        if area == 0.0:
            continue
        pts = _MIDPOINT_BARY @ sub
        phi = _barycentric(tri, pts)
        load += (area / 3.0) * (chi(pts[:, 0]) * pts[:, 0]) @ phi
    return load


def _symmetric(vals, rows, cols, n) -> sp.csr_matrix:
    # duplicate summation order differs between (i, j) and (j, i); average to
    # make the result exactly symmetric
    A = sp.coo_matrix((vals.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    return ((A + A.T) * 0.5).tocsr()


def assemble_operators(mesh: Mesh, geometry: ExperimentGeometry,
                       material: MaterialProperties, profile: LaserProfile) -> FemOperators:
    """Assemble the r-weighted mass, stiffness, face and load operators."""
    V, tris = mesh.vertices, mesh.triangles
    tol = 1e-9 * max(geometry.R, geometry.H)
    if (V[:, 0].min() < -tol or V[:, 0].max() > geometry.R + tol
            or V[:, 1].min() < -tol or V[:, 1].max() > geometry.H + tol):
        raise AssemblyError("mesh vertices lie outside [0, R] x [0, H]")
    n = mesh.n_h
    P = V[tris]                                      # (m, 3, 2)
    area = mesh.signed_areas()
    if np.any(area <= 0):
        raise AssemblyError("mesh has degenerate or clockwise triangles")

    # gradients of barycentric coordinates
    d = P[:, [1, 2, 0], :] - P[:, [2, 0, 1], :]      # opposite edges
    grads = np.stack([d[:, :, 1], -d[:, :, 0]], axis=2) / (2.0 * area[:, None, None])

    qp = np.einsum("qa,mad->mqd", _MIDPOINT_BARY, P)  # (m, 3 points, 2)
    r_q = qp[:, :, 0]
    wq = area[:, None] / 3.0 * r_q                   # weights incl. r
    Me = np.einsum("mq,qa,qb->mab", wq, _MIDPOINT_BARY, _MIDPOINT_BARY)
    r_int = wq.sum(axis=1)                           # integral of r over element
    Ke = np.einsum("mad,mbd->mab", grads, grads) * r_int[:, None, None]

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    M = _symmetric(Me, rows, cols, n)
    K = _symmetric(Ke, rows, cols, n)

    # laser source on the heated layer z <= z_f
    z_f = geometry.z_f
    f = np.zeros(n)
    zmax = P[:, :, 1].max(axis=1)
    zmin = P[:, :, 1].min(axis=1)
    inside = zmax <= z_f + tol
    fe = (wq * profile.chi(r_q)) @ _MIDPOINT_BARY
    np.add.at(f, tris[inside], fe[inside])
    straddle = np.flatnonzero(~inside & (zmin < z_f - tol))
    if len(straddle):
        logger.warning("%d elements straddle z_f; integrating their clipped parts", len(straddle))
        for e in straddle:
            np.add.at(f, tris[e], _clipped_source(P[e], z_f, profile.chi))

    # faces z = 0 and z = H
    edges = mesh.edges_with_tag(FACE)
    pa, pb = V[edges[:, 0]], V[edges[:, 1]]
    length = np.linalg.norm(pb - pa, axis=1)
    s = _GAUSS2
    phi = np.stack([1.0 - s, s], axis=1)             # (2 gauss, 2 nodes)
    r_g = pa[:, None, 0] + s[None, :] * (pb[:, 0] - pa[:, 0])[:, None]
    wg = 0.5 * length[:, None] * r_g
    Mbe = np.einsum("mg,ga,gb->mab", wg, phi, phi)
    brow = np.repeat(edges, 2, axis=1).ravel()
    bcol = np.tile(edges, (1, 2)).ravel()
    Mb = _symmetric(Mbe, brow, bcol, n)
    b = np.zeros(n)
    np.add.at(b, edges, wg @ phi)

    w = _disc_average(V, edges, geometry)
    return FemOperators(M=M, K=K, Mb=Mb, b=b, f=f, w=w)


def _disc_average(V: np.ndarray, face_edges: np.ndarray, geometry: ExperimentGeometry) -> np.ndarray:
    H, L = geometry.H, geometry.L
    tol = 1e-9 * H
    w = np.zeros(len(V))
    for a, c in face_edges:
        if abs(V[a, 1] - H) > tol or abs(V[c, 1] - H) > tol:
            continue
        if V[a, 0] > V[c, 0]:
            a, c = c, a
        r0, r1 = V[a, 0], V[c, 0]
        hi = min(r1, L)
        if hi <= r0:
            continue
        # exact for the quadratic integrand on the clipped interval
        rg = r0 + _GAUSS2 * (hi - r0)
        lam = (rg - r0) / (r1 - r0)
        wg = 0.5 * (hi - r0) * rg
        w[a] += wg @ (1.0 - lam)
        w[c] += wg @ lam
    return w * (2.0 / L ** 2)
