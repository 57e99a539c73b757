from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syslab.discrete.mesh import (
    Chain,
    WindingClass,
    build_mesh,
    default_resolution,
    flat_control_mesh,
    primitive_classes,
)
from syslab.errors import ValidationError
from syslab.metric_family import MetricParams


@pytest.fixture(scope="module")
def mesh4():
    return build_mesh(MetricParams(4), (32, 16, 16))


def test_z_edges_have_length_hz():
    m = build_mesh(MetricParams(1), (8, 8, 8))
    lo, hi = m.edge_offsets[2], m.edge_offsets[3]
    assert np.allclose(m.edge_weight[lo:hi], 1 / 8, atol=1e-15)


def test_y_edge_at_xhat_two(mesh4):
    hy = mesh4.spacing[1]
    e = mesh4.edge_index(1, 8, 3, 5)  # x = 8 * 0.25 = 2
    assert mesh4.edge_weight[e] == pytest.approx(hy * math.sqrt(5), abs=1e-6)


def test_cell_volumes_sum_to_total_volume():
    m = build_mesh(MetricParams(2), (32, 16, 16))
    assert m.cell_volume.sum() == pytest.approx(4.0, rel=0.01)


def test_resolution_guards():
    with pytest.raises(ValidationError):
        build_mesh(MetricParams(4), (8, 16, 16))
    with pytest.raises(ValidationError):
        build_mesh(MetricParams(1), (8, 4, 8))
    with pytest.raises(ValidationError):
        flat_control_mesh((1, 4, 4))


def test_default_resolution_policy():
    assert default_resolution(2) == ((32, 16, 16), True)
    assert default_resolution(8) == ((64, 32, 16), True)
    res, ok = default_resolution(16, max_cells=10_000)
    assert not ok and res[0] * res[1] * res[2] <= 20_000 and res[0] >= 64


@pytest.mark.parametrize("dims", [(4, 4, 4), (5, 8, 6)])
def test_boundary_of_boundary_vanishes(dims):
    m = flat_control_mesh(dims)
    assert abs(m.d1 @ m.d2).sum() == 0
    assert abs(m.d2 @ m.d3).sum() == 0


def test_boundary_matrix_shapes():
    m = flat_control_mesh((4, 5, 6))
    assert m.d1.shape == (m.n_vertices, m.n_edges)
    assert m.d2.shape == (m.n_edges, m.n_faces)
    assert m.d3.shape == (m.n_faces, m.n_cubes)


def test_homology_ranks_of_slab():
    # [0,1] x T^2 has Betti numbers 1, 2, 1, 0 (dense ranks on a tiny mesh)
    m = flat_control_mesh((3, 3, 3))
    r1 = np.linalg.matrix_rank(m.d1.toarray())
    r2 = np.linalg.matrix_rank(m.d2.toarray())
    r3 = np.linalg.matrix_rank(m.d3.toarray())
    b = [m.n_vertices - r1, m.n_edges - r1 - r2, m.n_faces - r2 - r3, m.n_cubes - r3]
    assert b == [1, 2, 1, 0]


def test_index_roundtrip(mesh4):
    e = mesh4.edge_index(1, 3, 7, 2)
    assert tuple(int(t) for t in mesh4.edge_info(e)) == (1, 3, 7, 2)
    f = mesh4.face_index("xz", 5, 1, 15)
    assert tuple(int(t) for t in mesh4.face_info(f)) == (1, 5, 1, 15)


@settings(max_examples=40, deadline=None)
@given(data=st.lists(st.tuples(st.integers(0, 200), st.integers(-3, 3)), max_size=30))
def test_chain_canonical_and_additive(data):
    idx = np.array([d[0] for d in data], dtype=np.int64)
    c = np.array([d[1] for d in data], dtype=np.int64)
    ch = Chain(1, idx, c)
    assert np.all(np.diff(ch.indices) > 0)
    assert np.all(ch.coefficients != 0)
    dense = np.zeros(201, dtype=np.int64)
    np.add.at(dense, idx, c)
    assert np.array_equal(ch.dense(201), dense)
    assert np.array_equal((ch + ch.scaled(-1)).dense(201), np.zeros(201))
    z2 = ch.to_z2()
    assert np.array_equal(z2.dense(201), dense % 2)


def test_z_circle_is_cycle_with_winding():
    m = flat_control_mesh((4, 4, 4))
    idx = [m.edge_index(2, 1, 2, l) for l in range(4)]
    ch = Chain(1, np.array(idx), np.ones(4, dtype=np.int64))
    assert ch.is_cycle(m)
    assert ch.winding(m) == WindingClass(1, 0)
    assert ch.weight(m) == pytest.approx(1.0)


def test_open_path_is_not_cycle():
    m = flat_control_mesh((4, 4, 4))
    ch = Chain(1, np.array([m.edge_index(2, 1, 2, 0)]), np.array([1]))
    assert not ch.is_cycle(m)


def test_boundary_of_cube_is_cycle():
    m = flat_control_mesh((4, 4, 4))
    cube = Chain(3, np.array([m.vertex_index(1, 1, 1)]), np.array([1]))
    bd = cube.boundary(m)
    assert len(bd) == 6
    assert bd.is_cycle(m)
    assert bd.boundary(m).indices.size == 0


def test_chain_write(tmp_path):
    m = flat_control_mesh((4, 4, 4))
    ch = Chain(1, np.array([3, 1]), np.array([1, 1]))
    p = tmp_path / "c.txt"
    ch.write(p, m)
    assert p.read_text().splitlines() == ["#chain dim=1 mesh=4x4x4", "1", "3"]


def test_chain_rejects_bad_input():
    with pytest.raises(ValidationError):
        Chain(4, np.array([0]), np.array([1]))
    with pytest.raises(ValidationError):
        Chain(1, np.array([0, 1]), np.array([1]))


def test_primitive_classes():
    cls = primitive_classes(2)
    assert WindingClass(1, 0) in cls and WindingClass(0, 1) in cls
    assert all(c.is_primitive() and not c.is_trivial() for c in cls)
    assert WindingClass(2, 0) not in cls
