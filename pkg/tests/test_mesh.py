import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from laserflash.errors import InvalidParameterError
from laserflash.mesh import AXIS, FACE, OUTER, ExperimentGeometry, build_rect_mesh, write_mesh_csv

from conftest import copper


def unit_geometry(z_f=0.5, L=0.5):
    return ExperimentGeometry(R=1.0, H=1.0, z_f=z_f, t_f=0.1, T=1.0, L=L)


def edge_counts(mesh):
    c = Counter()
    for tri in mesh.triangles:
        for a, b in ((0, 1), (1, 2), (2, 0)):
            c[tuple(sorted((tri[a], tri[b])))] += 1
    return c


def test_minimal_grid():
    m = build_rect_mesh(unit_geometry(), 1.0)
    assert m.n_h == 4 and len(m.triangles) == 2


def test_two_by_two_grid():
    m = build_rect_mesh(unit_geometry(), 0.5)
    assert m.n_h == 9 and len(m.triangles) == 8


@pytest.mark.parametrize("h", [0.0, -1.0, float("nan"), float("inf")])
def test_bad_h_target(h):
    with pytest.raises(InvalidParameterError):
        build_rect_mesh(unit_geometry(), h)


def test_geometry_validation():
    with pytest.raises(InvalidParameterError):
        ExperimentGeometry(R=1.0, H=1.0, z_f=2.0, t_f=0.1, T=1.0, L=0.5)
    with pytest.raises(InvalidParameterError):
        ExperimentGeometry(R=1.0, H=1.0, z_f=0.1, t_f=0.1, T=1.0, L=0.0)


def test_lines_snapped_to_cuts():
    g = copper().geometry
    m = build_rect_mesh(g, 1.7e-4)
    assert np.any(m.z_lines == g.z_f)
    assert np.any(m.r_lines == g.L)


def test_reference_scale_mesh():
    # about the reported vertex count; the nominal cell side is close to the
    # reported element size while h (longest edge, a diagonal) is larger
    g = copper().geometry
    m = build_rect_mesh(g, 4.6e-5)
    assert abs(m.n_h - 12206) / 12206 < 0.03
    cell = max(g.R / (len(m.r_lines) - 1), g.H / (len(m.z_lines) - 1))
    assert abs(cell - 4.24e-5) / 4.24e-5 < 0.1
    assert m.h == pytest.approx(math.hypot(np.diff(m.r_lines).max(), np.diff(m.z_lines).max()))


geometries = st.builds(
    lambda R, H, zf, Lf: ExperimentGeometry(R=R, H=H, z_f=zf * H, t_f=0.1, T=1.0, L=Lf * R),
    st.floats(0.5, 3.0), st.floats(0.1, 1.0), st.floats(0.02, 0.9), st.floats(0.05, 1.0))


@settings(max_examples=40, deadline=None)
@given(g=geometries, frac=st.floats(0.03, 0.5))
def test_mesh_invariants(g, frac):
    m = build_rect_mesh(g, frac * min(g.R, g.H))
    areas = m.signed_areas()
    assert np.all(areas > 0)
    assert areas.sum() == pytest.approx(g.R * g.H, rel=1e-12)
    counts = edge_counts(m)
    boundary = {tuple(sorted(e)) for e in m.boundary_edges}
    assert len(boundary) == len(m.boundary_edges)
    for e, c in counts.items():
        assert c == (1 if e in boundary else 2)
    assert set(boundary) == {e for e, c in counts.items() if c == 1}
    # tags partition the boundary and match the geometry
    tags = list(m.edge_tags)
    assert set(tags) <= {AXIS, OUTER, FACE}
    for tag, check in ((AXIS, lambda p: np.allclose(p[:, 0], 0)),
                       (OUTER, lambda p: np.allclose(p[:, 0], g.R)),
                       (FACE, lambda p: np.allclose(p[:, 1], 0) or np.allclose(p[:, 1], g.H))):
        for e in m.edges_with_tag(tag):
            assert check(m.vertices[e])
    assert m.h >= max(np.diff(m.r_lines).max(), np.diff(m.z_lines).max())


def test_mesh_csv(tmp_path):
    m = build_rect_mesh(unit_geometry(), 0.5)
    vpath, tpath = write_mesh_csv(m, tmp_path / "mesh")
    assert len(vpath.read_text().splitlines()) == m.n_h + 1
    assert len(tpath.read_text().splitlines()) == len(m.triangles) + 1
