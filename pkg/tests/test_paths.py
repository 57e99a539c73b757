from __future__ import annotations

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.csgraph import dijkstra

from syslab.discrete.cuts import z_circle
from syslab.discrete.mesh import WindingClass, build_mesh, flat_control_mesh
from syslab.discrete.paths import (
    Loop,
    ball_mass,
    build_stencil,
    canonical_translate,
    chord_offsets,
    loop_start_vertex,
    loop_to_chain,
    shortest_nontrivial_cycle,
)
from syslab.errors import ValidationError
from syslab.metric_family import MetricParams


def brute_force_systole(mesh, max_winding=2):
    """Independent oracle: scipy Dijkstra on an explicit periodic cover graph."""
    st = build_stencil(mesh)
    nx, ny, nz = mesh.dims
    C = 2 * max_winding + 1
    NY, NZ = C * ny, C * nz
    i, K, L = np.meshgrid(np.arange(nx + 1), np.arange(NY), np.arange(NZ), indexing="ij")
    i, K, L = i.ravel(), K.ravel(), L.ravel()
    src = (i * NY + K) * NZ + L
    rows, cols, vals = [], [], []
    for m, (di, dk, dl) in enumerate(st.moves):
        w = st.weights[m, i]
        ok = np.isfinite(w)
        rows.append(src[ok])
        cols.append(((i[ok] + di) * NY + (K[ok] + dk) % NY) * NZ + (L[ok] + dl) % NZ)
        vals.append(w[ok])
    n = (nx + 1) * NY * NZ
    G = sp.csr_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n))
    best = np.inf
    starts = [(i0 * NY) * NZ for i0 in range(nx + 1)]
    d = dijkstra(G, indices=starts)
    for r, i0 in enumerate(range(nx + 1)):
        for a in range(-max_winding, max_winding + 1):
            for b in range(-max_winding, max_winding + 1):
                if (a, b) == (0, 0):
                    continue
                t = (i0 * NY + (b * ny) % NY) * NZ + (a * nz) % NZ
                best = min(best, d[r, t])
    return best


@pytest.mark.parametrize("j,res", [(1, (8, 8, 8)), (2, (16, 8, 8))])
def test_systole_matches_brute_force(j, res):
    mesh = build_mesh(MetricParams(j), res)
    r = shortest_nontrivial_cycle(mesh)
    assert r.value == pytest.approx(brute_force_systole(mesh), rel=1e-12)


def test_flat_control_systole():
    mesh = flat_control_mesh((8, 8, 8))
    r = shortest_nontrivial_cycle(mesh)
    assert abs(r.value - 1.0) <= mesh.spacing[1]


def test_systole_j4_default_mesh():
    mesh = build_mesh(MetricParams(4), (32, 16, 16))
    r = shortest_nontrivial_cycle(mesh)
    assert r.value == pytest.approx(1.0, rel=0.05)
    assert (abs(r.winding.a), abs(r.winding.b)) in {(1, 0), (0, 1)}
    assert r.witness.is_cycle(mesh)
    assert r.witness.winding(mesh) == r.winding


def test_tie_break_is_deterministic():
    mesh = build_mesh(MetricParams(2), (32, 16, 16))
    a = shortest_nontrivial_cycle(mesh)
    b = shortest_nontrivial_cycle(mesh)
    assert np.array_equal(a.witness.indices, b.witness.indices)
    assert a.winding == b.winding


def test_max_winding_guard():
    with pytest.raises(ValidationError):
        shortest_nontrivial_cycle(flat_control_mesh((4, 4, 4)), max_winding=0)


def test_chord_offsets_are_primitive_or_neighbour():
    off = chord_offsets(2)
    inplane = off[off[:, 0] == 0]
    assert len(inplane) == 16  # primitive vectors in [-2, 2]^2
    assert len(off) - len(inplane) == 18


def test_loop_staircase_is_cycle_in_class():
    mesh = flat_control_mesh((4, 8, 8))
    moves = np.array([[0, 1, 2]] * 8, dtype=np.int64)
    loop = Loop((2, 3, 1), moves, 0.0)
    ch = loop_to_chain(loop, mesh)
    assert ch.is_cycle(mesh)
    assert ch.winding(mesh) == WindingClass(2, 1) == loop.winding(mesh)


def test_canonical_translate_invariant_under_shift():
    mesh = flat_control_mesh((4, 8, 8))
    moves = np.array([[0, 1, 1]] * 8, dtype=np.int64)
    a = canonical_translate(Loop((1, 0, 0), moves, 0.0), mesh)[1]
    b = canonical_translate(Loop((1, 3, 5), moves, 0.0), mesh)[1]
    assert np.array_equal(a.indices, b.indices)


def test_ball_mass_straight_z_circle():
    mesh = flat_control_mesh((8, 16, 16))
    ch = z_circle(mesh, i=4, k=3)
    center = int(mesh.vertex_index(4, 3, 5))
    assert ball_mass(ch, center, 0.3, mesh) == pytest.approx(0.6, abs=mesh.spacing[2])


def test_ball_mass_vanishes_as_radius_shrinks():
    mesh = flat_control_mesh((8, 16, 16))
    ch = z_circle(mesh, i=4)
    center = int(mesh.vertex_index(4, 0, 0))
    masses = [ball_mass(ch, center, r, mesh) for r in (0.2, 0.05, 0.01, 0.0)]
    assert masses[-1] == 0.0
    assert all(a >= b for a, b in zip(masses, masses[1:]))
    assert masses[2] == pytest.approx(0.02, abs=1e-12)


@pytest.mark.parametrize("kind", ["flat", "g2", "g8"])
def test_ball_mass_monotonicity_for_witness(kind):
    if kind == "flat":
        mesh = flat_control_mesh((16, 16, 16))
    else:
        j = 2 if kind == "g2" else 8
        mesh = build_mesh(MetricParams(j), (max(32, 8 * j), max(16, 4 * j), 16))
    r = shortest_nontrivial_cycle(mesh)
    c = loop_start_vertex(r, mesh)
    assert ball_mass(r.witness, c, 0.25, mesh) >= 0.45


def test_ball_mass_guards():
    mesh = flat_control_mesh((8, 8, 8))
    ch = z_circle(mesh, i=4)
    with pytest.raises(ValidationError):
        ball_mass(ch, int(mesh.vertex_index(4, 0, 0)), 1.5, mesh)
    with pytest.raises(ValidationError):
        ball_mass(ch, int(mesh.vertex_index(0, 0, 0)), 0.2, mesh)
