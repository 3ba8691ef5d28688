import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from scale_probe.mesh import (AlignmentError, ContainmentError, DegenerateSubdomainError, InvalidSubdivisionError,
                              Rect, build_mesh, cells_in, layer_count, mesh_size, shrink_by_layers)

UNIT = Rect(0.0, 0.0, 1.0, 1.0)


@pytest.mark.parametrize("n, nv, nt", [(1, 4, 2), (2, 9, 8), (5, 36, 50)])
def test_counts(n, nv, nt):
    m = build_mesh(UNIT, n)
    assert m.num_vertices == nv and m.num_cells == nt
    assert len(m.triangles) == 2 * n * n


def test_invalid_subdivision():
    with pytest.raises(InvalidSubdivisionError):
        build_mesh(UNIT, 0)


def test_empty_rect_rejected():
    with pytest.raises(ValueError):
        Rect(0.0, 0.0, 0.0, 1.0)


@pytest.mark.parametrize("n, expected", [(1, math.sqrt(2)), (4, math.sqrt(2) / 4), (8, math.sqrt(2) / 8)])
def test_mesh_size(n, expected):
    assert mesh_size(build_mesh(UNIT, n)) == pytest.approx(expected, rel=1e-14)


def test_mesh_size_rectangle():
    m = build_mesh(Rect(0.0, 0.0, 2.0, 1.0), 8, 4)
    assert mesh_size(m) == pytest.approx(math.sqrt(2) / 4, rel=1e-14)


def test_min_angle_is_45_degrees():
    m = build_mesh(UNIT, 3)
    p = m.vertices[m.triangles]
    angles = []
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cos = np.sum(a * b, axis=1) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        angles.append(np.degrees(np.arccos(cos)))
    assert np.min(angles) == pytest.approx(45.0, abs=1e-10)


def test_diagonal_direction_and_positive_orientation():
    m = build_mesh(UNIT, 2)
    p = m.vertices[m.triangles]
    e1, e2 = p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]
    assert np.all(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0] > 0)
    # every square is cut along its lower-left to upper-right diagonal
    lower = m.triangles[0::2]
    assert np.allclose(m.vertices[lower[:, 2]] - m.vertices[lower[:, 0]], [0.5, 0.5])


def test_conformity_each_interior_edge_shared_twice():
    m = build_mesh(UNIT, 4)
    edges = {}
    for tri in m.triangles:
        for k in range(3):
            e = tuple(sorted((tri[k], tri[(k + 1) % 3])))
            edges[e] = edges.get(e, 0) + 1
    counts = np.array(list(edges.values()))
    assert set(counts) == {1, 2}
    assert np.sum(counts == 1) == 4 * 4  # boundary edges


def test_boundary_flags():
    m = build_mesh(UNIT, 2)
    assert m.boundary_vertex_flags.sum() == 8
    assert not m.boundary_vertex_flags[4]


@given(st.integers(1, 12), st.integers(1, 12),
       st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 5), st.floats(0.1, 5))
@settings(max_examples=40, deadline=None)
def test_area_sum(nx, ny, x0, y0, w, h):
    dom = Rect(x0, y0, x0 + w, y0 + h)
    m = build_mesh(dom, nx, ny)
    assert m.cell_areas().sum() == pytest.approx(dom.area, rel=1e-12)


def test_cells_in_examples():
    assert cells_in(build_mesh(UNIT, 4), UNIT).size == 32
    assert cells_in(build_mesh(UNIT, 4), Rect(0, 0, 0.25, 0.25)).size == 2
    assert cells_in(build_mesh(UNIT, 8), Rect(0.25, 0.25, 0.75, 0.75)).size == 32


def test_cells_in_closure():
    m = build_mesh(UNIT, 8)
    sub = Rect(0.25, 0.125, 0.75, 0.5)
    cells = cells_in(m, sub)
    p = m.vertices[m.triangles[cells]]
    assert np.all(sub.contains_points(p[..., 0], p[..., 1], tol=1e-14))
    outside = np.setdiff1d(np.arange(m.num_cells), cells)
    q = m.vertices[m.triangles[outside]]
    assert not np.any(np.all(sub.contains_points(q[..., 0], q[..., 1], tol=1e-14), axis=1))


def test_misaligned_subdomain():
    with pytest.raises(AlignmentError):
        cells_in(build_mesh(UNIT, 4), Rect(0.0, 0.0, 0.3, 0.5))


def test_snap_tolerance():
    m = build_mesh(UNIT, 8)
    assert cells_in(m, Rect(0.0, 0.0, 0.25 + 1e-14, 0.5)).size == 16
    with pytest.raises(AlignmentError):
        cells_in(m, Rect(0.0, 0.0, 0.25 + 1e-9, 0.5))


def test_shrink_examples():
    m = build_mesh(UNIT, 8)
    assert shrink_by_layers(m, UNIT, 1) == Rect(0.125, 0.125, 0.875, 0.875)
    assert shrink_by_layers(m, Rect(0.25, 0.25, 0.75, 0.75), 1) == Rect(0.375, 0.375, 0.625, 0.625)
    with pytest.raises(DegenerateSubdomainError):
        shrink_by_layers(m, Rect(0.25, 0.25, 0.75, 0.75), 2)


def test_shrink_keep_boundary():
    m = build_mesh(Rect(0, 0, 2, 2), 16)
    assert shrink_by_layers(m, Rect(0, 0, 1, 1), 2, keep_boundary=True) == Rect(0, 0, 0.75, 0.75)


def test_layer_count_examples():
    m = build_mesh(UNIT, 8)
    assert layer_count(m, Rect(0.375, 0.375, 0.625, 0.625), Rect(0.125, 0.125, 0.875, 0.875)) == 2
    assert layer_count(m, Rect(0.125, 0.125, 0.875, 0.875), UNIT) == 1
    with pytest.raises(ContainmentError):
        layer_count(m, UNIT, UNIT)
    with pytest.raises(ContainmentError):
        layer_count(m, Rect(0.5, 0.5, 1.0, 1.0), Rect(0.0, 0.0, 0.75, 0.75))


@given(st.integers(4, 16), st.integers(0, 3), st.integers(0, 3))
@settings(max_examples=40, deadline=None)
def test_shrink_composes(n, j1, j2):
    m = build_mesh(UNIT, n)
    try:
        both = shrink_by_layers(m, UNIT, j1 + j2)
    except DegenerateSubdomainError:
        return
    assert shrink_by_layers(m, shrink_by_layers(m, UNIT, j1), j2) == both


@given(st.integers(4, 16), st.integers(1, 6), st.booleans())
@settings(max_examples=40, deadline=None)
def test_layer_count_inverts_shrink(n, j, keep):
    dom = Rect(0, 0, 2, 2)
    m = build_mesh(dom, 2 * n)
    sub = Rect(0, 0, 1, 1) if keep else m.rect_from_box(n // 2, n // 2, n + n // 2, n + n // 2)
    try:
        inner = shrink_by_layers(m, sub, j, keep_boundary=keep)
    except DegenerateSubdomainError:
        return
    assert layer_count(m, inner, sub, keep_boundary=keep) == j


@given(st.integers(2, 8), st.data())
@settings(max_examples=40, deadline=None)
def test_cells_monotone(n, data):
    m = build_mesh(UNIT, n)
    i0 = data.draw(st.integers(0, n - 1))
    j0 = data.draw(st.integers(0, n - 1))
    i1 = data.draw(st.integers(i0 + 1, n))
    j1 = data.draw(st.integers(j0 + 1, n))
    outer = m.rect_from_box(i0, j0, i1, j1)
    a = data.draw(st.integers(i0, i1 - 1))
    b = data.draw(st.integers(j0, j1 - 1))
    inner = m.rect_from_box(a, b, data.draw(st.integers(a + 1, i1)), data.draw(st.integers(b + 1, j1)))
    assert np.all(np.isin(cells_in(m, inner), cells_in(m, outer)))


def test_enclosing_box():
    m = build_mesh(UNIT, 8)
    assert m.enclosing_box(Rect(0.1, 0.125, 0.3, 0.9)) == Rect(0.0, 0.125, 0.375, 1.0)
