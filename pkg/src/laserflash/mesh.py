"""Structured triangulation of the axisymmetric half-section (0, R) x (0, H)."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidParameterError

logger = logging.getLogger(__name__)

AXIS, OUTER, FACE = "axis", "outer", "face"
BOUNDARY_TAGS = (AXIS, OUTER, FACE)

# a snapped grid line must leave every neighbouring cell at least this
# fraction of the nominal cell width
_MIN_SNAP_FRACTION = 0.25


@dataclass(frozen=True)
class ExperimentGeometry:
    """Sample and experiment dimensions (SI units)."""

    R: float
    H: float
    z_f: float
    t_f: float
    T: float
    L: float

    def __post_init__(self):
        for name in ("R", "H", "z_f", "t_f", "T", "L"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise InvalidParameterError(f"geometry.{name} must be finite and > 0, got {value!r}")
        if self.z_f > self.H:
            raise InvalidParameterError("geometry.z_f must not exceed geometry.H")
        if self.t_f > self.T:
            raise InvalidParameterError("geometry.t_f must not exceed geometry.T")
        if self.L > self.R:
            raise InvalidParameterError("geometry.L must not exceed geometry.R")


@dataclass(frozen=True, eq=False)
class Mesh:
    """P1 triangle mesh in (r, z) coordinates.

    ``boundary_edges`` holds vertex pairs and ``edge_tags`` the matching
    tag (``"axis"``, ``"outer"`` or ``"face"``). ``r_lines``/``z_lines`` are
    the grid-line coordinates of the structured grid the mesh came from.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    edge_tags: np.ndarray
    h: float
    r_lines: np.ndarray = field(repr=False)
    z_lines: np.ndarray = field(repr=False)

    @property
    def n_h(self) -> int:
        return len(self.vertices)

    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        return 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                      - (p[:, 2, 0] - p[:, 0, 0]) * (p[:, 1, 1] - p[:, 0, 1]))

    def edges_with_tag(self, tag: str) -> np.ndarray:
        return self.boundary_edges[self.edge_tags == tag]


def _grid_lines(length: float, n_cells: int, snap_to: float, label: str) -> np.ndarray:
    lines = np.linspace(0.0, length, n_cells + 1)
    lines[-1] = length
    if snap_to >= length or np.any(np.isclose(lines, snap_to, rtol=0, atol=1e-12 * length)):
        return lines
    width = length / n_cells
    i = int(np.clip(np.rint(snap_to / width), 1, n_cells - 1)) if n_cells > 1 else 0
    if i == 0:
        logger.warning("cannot snap a grid line to %s=%g: single cell", label, snap_to)
        return lines
    lo, hi = lines[i - 1], lines[i + 1]
    if min(snap_to - lo, hi - snap_to) < _MIN_SNAP_FRACTION * width:
        logger.warning("cannot snap a grid line to %s=%g; clipped integration will be used",
                       label, snap_to)
        return lines
    lines[i] = snap_to
    return lines


def build_rect_mesh(geometry: ExperimentGeometry, h_target: float) -> Mesh:
    """Triangulate (0, R) x (0, H) on a ceil(R/h) x ceil(H/h) grid.

    Every cell is split along its lower-left to upper-right diagonal. The
    nearest interior grid lines are moved onto ``z = z_f`` and ``r = L`` so
    that the heated layer and the observation disc are resolved by element
    boundaries. The returned ``h`` is the longest edge in the mesh.
    """
    if not (isinstance(h_target, (int, float, np.floating)) and math.isfinite(h_target)
            and h_target > 0):
        raise InvalidParameterError(f"h_target must be finite and > 0, got {h_target!r}")
    R, H = geometry.R, geometry.H
    n_r = max(1, math.ceil(R / h_target - 1e-9))
    n_z = max(1, math.ceil(H / h_target - 1e-9))
    r_lines = _grid_lines(R, n_r, geometry.L, "L")
    z_lines = _grid_lines(H, n_z, geometry.z_f, "z_f")

    rr, zz = np.meshgrid(r_lines, z_lines, indexing="xy")
    vertices = np.column_stack([rr.ravel(), zz.ravel()])

    def vid(i, j):
        return j * (n_r + 1) + i

    ii, jj = np.meshgrid(np.arange(n_r), np.arange(n_z), indexing="xy")
    ii, jj = ii.ravel(), jj.ravel()
    v00, v10 = vid(ii, jj), vid(ii + 1, jj)
    v01, v11 = vid(ii, jj + 1), vid(ii + 1, jj + 1)
    triangles = np.empty((2 * len(ii), 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])

    i_all, j_all = np.arange(n_r), np.arange(n_z)
    edges, tags = [], []
    for j in (0, n_z):
        edges.append(np.column_stack([vid(i_all, j), vid(i_all + 1, j)]))
        tags.append(np.full(n_r, FACE))
    edges.append(np.column_stack([vid(0, j_all), vid(0, j_all + 1)]))
    tags.append(np.full(n_z, AXIS))
    edges.append(np.column_stack([vid(n_r, j_all), vid(n_r, j_all + 1)]))
    tags.append(np.full(n_z, OUTER))

    dr, dz = np.diff(r_lines), np.diff(z_lines)
    h = float(np.sqrt(dr.max() ** 2 + dz.max() ** 2))
    mesh = Mesh(vertices=vertices, triangles=triangles,
                boundary_edges=np.vstack(edges).astype(np.int64),
                edge_tags=np.concatenate(tags).astype(object),
                h=h, r_lines=r_lines, z_lines=z_lines)
    for arr in (mesh.vertices, mesh.triangles, mesh.boundary_edges, mesh.edge_tags):
        arr.flags.writeable = False
    logger.info("mesh: %d x %d cells, n_h=%d, h=%.3e m", n_r, n_z, mesh.n_h, h)
    return mesh


def write_mesh_csv(mesh: Mesh, prefix) -> tuple[Path, Path]:
    """Dump vertex and triangle tables as ``<prefix>_vertices.csv`` / ``_triangles.csv``."""
    prefix = Path(prefix)
    vpath = prefix.with_name(prefix.name + "_vertices.csv")
    tpath = prefix.with_name(prefix.name + "_triangles.csv")
    with open(vpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "r_m", "z_m"])
        for i, (r, z) in enumerate(mesh.vertices):
            w.writerow([i, repr(float(r)), repr(float(z))])
    with open(tpath, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "v0", "v1", "v2"])
        for i, tri in enumerate(mesh.triangles):
            w.writerow([i, *map(int, tri)])
    return vpath, tpath
