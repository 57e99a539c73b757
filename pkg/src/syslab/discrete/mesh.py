"""Metric-weighted cubical complexes on T^2 x I.

Cells are addressed by flat integer indices.  With vertex coordinates
(i, k, l), i in [0, nx], k in Z/ny, l in Z/nz:

* vertices:  (i * ny + k) * nz + l
* edges:     x-edges (i < nx), then y-edges, then z-edges, each block in the
             same (i, k, l) order
* faces:     xy-faces (e_x ^ e_y, i < nx), xz-faces (e_x ^ e_z, i < nx),
             yz-faces (e_y ^ e_z, i <= nx)
* cubes:     (i * ny + k) * nz + l with i < nx

The face at (i, k, l) spans [i, i+1] x [k, k+1] in its two directions, with
the third coordinate fixed at its base value.  Boundary maps are scipy
sparse matrices over Z.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from math import gcd
from typing import Callable

import numpy as np
import scipy.sparse as sp

from ..errors import ValidationError
from ..metric_family import MetricParams, hat_values

GAUSS2 = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


@dataclass(frozen=True)
class WindingClass:
    """Homology class of T^2: ``a`` windings along z and ``b`` along y."""

    a: int
    b: int

    def is_trivial(self) -> bool:
        return self.a == 0 and self.b == 0

    def is_primitive(self) -> bool:
        return gcd(abs(self.a), abs(self.b)) == 1

    def scaled(self, m: int) -> "WindingClass":
        return WindingClass(m * self.a, m * self.b)

    def __str__(self) -> str:
        return f"{self.a},{self.b}"


def primitive_classes(max_winding: int) -> list[WindingClass]:
    out = []
    for a in range(-max_winding, max_winding + 1):
        for b in range(-max_winding, max_winding + 1):
            if (a, b) != (0, 0) and gcd(abs(a), abs(b)) == 1:
                out.append(WindingClass(a, b))
    return out


def local_metric(s: np.ndarray) -> np.ndarray:
    """g = dx^2 + dy^2 + (dz - s dy)^2 for an array of shear values s."""
    s = np.asarray(s, dtype=float)
    g = np.zeros(s.shape + (3, 3))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = 1.0 + s * s
    g[..., 1, 2] = g[..., 2, 1] = -s
    g[..., 2, 2] = 1.0
    return g


@dataclass(frozen=True, eq=False)
class CubicalMesh:
    dims: tuple[int, int, int]
    spacing: tuple[float, float, float]
    shear: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    edge_weight: np.ndarray = field(repr=False)
    face_weight: np.ndarray = field(repr=False)
    cell_volume: np.ndarray = field(repr=False)
    params: MetricParams | None = None
    periodic: tuple[bool, bool, bool] = (False, True, True)
    label: str = "g_j"

    # --- sizes -------------------------------------------------------------
    @property
    def nx(self) -> int:
        return self.dims[0]

    @property
    def ny(self) -> int:
        return self.dims[1]

    @property
    def nz(self) -> int:
        return self.dims[2]

    @property
    def n_vertices(self) -> int:
        return (self.nx + 1) * self.ny * self.nz

    @property
    def n_cubes(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def edge_offsets(self) -> tuple[int, int, int, int]:
        nx, ny, nz = self.dims
        ex = nx * ny * nz
        ey = (nx + 1) * ny * nz
        return (0, ex, ex + ey, ex + 2 * ey)

    @property
    def face_offsets(self) -> tuple[int, int, int, int]:
        nx, ny, nz = self.dims
        fxy = nx * ny * nz
        fyz = (nx + 1) * ny * nz
        return (0, fxy, 2 * fxy, 2 * fxy + fyz)

    @property
    def n_edges(self) -> int:
        return self.edge_offsets[3]

    @property
    def n_faces(self) -> int:
        return self.face_offsets[3]

    def vertex_index(self, i, k, l):
        return (np.asarray(i) * self.ny + np.asarray(k) % self.ny) * self.nz + np.asarray(l) % self.nz

    def vertex_coords(self, v):
        v = np.asarray(v)
        l = v % self.nz
        k = (v // self.nz) % self.ny
        i = v // (self.ny * self.nz)
        return i, k, l

    def edge_index(self, axis: int, i, k, l):
        off = self.edge_offsets[axis]
        return off + self.vertex_index(i, k, l)

    def face_index(self, kind: str, i, k, l):
        off = self.face_offsets[("xy", "xz", "yz").index(kind)]
        return off + self.vertex_index(i, k, l)

    def edge_info(self, e):
        """(axis, i, k, l) for edge indices."""
        e = np.asarray(e)
        off = np.asarray(self.edge_offsets)
        axis = np.searchsorted(off, e, side="right") - 1
        i, k, l = self.vertex_coords(e - off[axis])
        return axis, i, k, l

    def face_info(self, f):
        f = np.asarray(f)
        off = np.asarray(self.face_offsets)
        kind = np.searchsorted(off, f, side="right") - 1
        i, k, l = self.vertex_coords(f - off[kind])
        return kind, i, k, l

    # --- boundary operators --------------------------------------------------
    @cached_property
    def d1(self) -> sp.csr_matrix:
        """Edges -> vertices."""
        nx, ny, nz = self.dims
        rows, cols, vals = [], [], []
        for axis, step, ni in ((0, (1, 0, 0), nx), (1, (0, 1, 0), nx + 1), (2, (0, 0, 1), nx + 1)):
            i, k, l = np.meshgrid(np.arange(ni), np.arange(ny), np.arange(nz), indexing="ij")
            e = self.edge_index(axis, i, k, l).ravel()
            head = self.vertex_index(i + step[0], k + step[1], l + step[2]).ravel()
            tail = self.vertex_index(i, k, l).ravel()
            rows += [head, tail]
            cols += [e, e]
            vals += [np.ones(e.size, int), -np.ones(e.size, int)]
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_vertices, self.n_edges),
        )

    @cached_property
    def d2(self) -> sp.csr_matrix:
        """Faces -> edges."""
        nx, ny, nz = self.dims
        rows, cols, vals = [], [], []

        def add(f, e, s):
            rows.append(e.ravel())
            cols.append(f.ravel())
            vals.append(np.full(f.size, s, dtype=int))

        i, k, l = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        f = self.face_index("xy", i, k, l)
        add(f, self.edge_index(0, i, k, l), 1)
        add(f, self.edge_index(1, i + 1, k, l), 1)
        add(f, self.edge_index(0, i, k + 1, l), -1)
        add(f, self.edge_index(1, i, k, l), -1)
        f = self.face_index("xz", i, k, l)
        add(f, self.edge_index(0, i, k, l), 1)
        add(f, self.edge_index(2, i + 1, k, l), 1)
        add(f, self.edge_index(0, i, k, l + 1), -1)
        add(f, self.edge_index(2, i, k, l), -1)
        i, k, l = np.meshgrid(np.arange(nx + 1), np.arange(ny), np.arange(nz), indexing="ij")
        f = self.face_index("yz", i, k, l)
        add(f, self.edge_index(1, i, k, l), 1)
        add(f, self.edge_index(2, i, k + 1, l), 1)
        add(f, self.edge_index(1, i, k, l + 1), -1)
        add(f, self.edge_index(2, i, k, l), -1)
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(self.n_edges, self.n_faces),
        )

    @cached_property
    def d3(self) -> sp.csr_matrix:
        """Cubes -> faces."""
        nx, ny, nz = self.dims
        i, k, l = np.meshgrid(np.arange(nx), np.arange(ny), np.arange(nz), indexing="ij")
        c = self.vertex_index(i, k, l).ravel()
        parts = [
            (self.face_index("yz", i + 1, k, l), 1),
            (self.face_index("yz", i, k, l), -1),
            (self.face_index("xz", i, k + 1, l), -1),
            (self.face_index("xz", i, k, l), 1),
            (self.face_index("xy", i, k, l + 1), 1),
            (self.face_index("xy", i, k, l), -1),
        ]
        rows = np.concatenate([f.ravel() for f, _ in parts])
        vals = np.concatenate([np.full(c.size, s, dtype=int) for _, s in parts])
        cols = np.tile(c, len(parts))
        return sp.csr_matrix((vals, (rows, cols)), shape=(self.n_faces, self.n_cubes))

    def boundary_matrix(self, dim: int) -> sp.csr_matrix:
        return {1: self.d1, 2: self.d2, 3: self.d3}[dim]

    def boundary_face_mask(self) -> np.ndarray:
        """True on yz-faces lying in x = 0 or x = 2j."""
        mask = np.zeros(self.n_faces, dtype=bool)
        kind, i, _, _ = self.face_info(np.arange(self.n_faces))
        mask[(kind == 2) & ((i == 0) | (i == self.nx))] = True
        return mask

    def boundary_edge_mask(self) -> np.ndarray:
        axis, i, _, _ = self.edge_info(np.arange(self.n_edges))
        return (axis > 0) & ((i == 0) | (i == self.nx))

    def boundary_vertex_mask(self) -> np.ndarray:
        i, _, _ = self.vertex_coords(np.arange(self.n_vertices))
        return (i == 0) | (i == self.nx)

    def slab_shear(self) -> np.ndarray:
        """Shear value at each vertex level x = i * hx."""
        return np.asarray(self.shear(np.arange(self.nx + 1) * self.spacing[0]), dtype=float)


# ---------------------------------------------------------------------------
# chains

@dataclass(frozen=True, eq=False)
class Chain:
    """A sparse chain: sorted unique cell indices with nonzero coefficients."""

    dimension: int
    indices: np.ndarray
    coefficients: np.ndarray
    ring: str = "Z"
    relative: bool = False

    def __post_init__(self):
        if self.dimension not in (0, 1, 2, 3):
            raise ValidationError("chain dimension must be 0..3")
        if self.ring not in ("Z", "Z2"):
            raise ValidationError("ring must be 'Z' or 'Z2'")
        idx = np.asarray(self.indices, dtype=np.int64)
        c = np.asarray(self.coefficients, dtype=np.int64)
        if idx.shape != c.shape:
            raise ValidationError("indices and coefficients differ in length")
        order = np.argsort(idx, kind="stable")
        idx, c = idx[order], c[order]
        uniq, inv = np.unique(idx, return_inverse=True)
        summed = np.zeros(len(uniq), dtype=np.int64)
        np.add.at(summed, inv, c)
        if self.ring == "Z2":
            summed %= 2
        keep = summed != 0
        object.__setattr__(self, "indices", uniq[keep])
        object.__setattr__(self, "coefficients", summed[keep])

    @classmethod
    def from_dense(cls, dimension: int, dense: np.ndarray, ring: str = "Z", relative: bool = False) -> "Chain":
        dense = np.asarray(dense)
        nz = np.flatnonzero(dense)
        return cls(dimension, nz, dense[nz].astype(np.int64), ring, relative)

    def dense(self, size: int) -> np.ndarray:
        out = np.zeros(size, dtype=np.int64)
        out[self.indices] = self.coefficients
        return out

    def __len__(self) -> int:
        return len(self.indices)

    def __add__(self, other: "Chain") -> "Chain":
        if other.dimension != self.dimension:
            raise ValidationError("cannot add chains of different dimension")
        return Chain(
            self.dimension,
            np.concatenate([self.indices, other.indices]),
            np.concatenate([self.coefficients, other.coefficients]),
            self.ring,
            self.relative or other.relative,
        )

    def scaled(self, m: int) -> "Chain":
        return Chain(self.dimension, self.indices, m * self.coefficients, self.ring, self.relative)

    def to_z2(self) -> "Chain":
        return Chain(self.dimension, self.indices, self.coefficients, "Z2", self.relative)

    def boundary(self, mesh: CubicalMesh) -> "Chain":
        if self.dimension == 0:
            raise ValidationError("0-chains have no boundary")
        d = mesh.boundary_matrix(self.dimension)
        size = d.shape[1]
        if len(self) and self.indices[-1] >= size:
            raise ValidationError("chain index out of range for this mesh")
        out = d @ self.dense(size)
        return Chain.from_dense(self.dimension - 1, out, self.ring, self.relative)

    def is_cycle(self, mesh: CubicalMesh) -> bool:
        bd = self.boundary(mesh)
        if not len(bd):
            return True
        if not self.relative:
            return False
        mask = {1: mesh.boundary_vertex_mask, 2: mesh.boundary_edge_mask, 3: mesh.boundary_face_mask}[
            self.dimension
        ]()
        return bool(np.all(mask[bd.indices]))

    def weight(self, mesh: CubicalMesh) -> float:
        w = {1: mesh.edge_weight, 2: mesh.face_weight, 3: mesh.cell_volume}[self.dimension]
        return float(np.sum(np.abs(self.coefficients) * w[self.indices]))

    def winding(self, mesh: CubicalMesh) -> WindingClass:
        """Class of a 1-cycle: signed flux through the planes z = 0 and y = 0."""
        if self.dimension != 1:
            raise ValidationError("winding is defined for 1-chains")
        axis, i, k, l = mesh.edge_info(self.indices)
        a = int(np.sum(self.coefficients[(axis == 2) & (l == 0)]))
        b = int(np.sum(self.coefficients[(axis == 1) & (k == 0)]))
        return WindingClass(a, b)

    def write(self, path, mesh: CubicalMesh) -> None:
        nx, ny, nz = mesh.dims
        with open(path, "w") as fh:
            fh.write(f"#chain dim={self.dimension} mesh={nx}x{ny}x{nz}\n")
            for c in self.indices:
                fh.write(f"{int(c)}\n")


# ---------------------------------------------------------------------------
# construction

def _segment_length(g_at, p0: np.ndarray, d: np.ndarray) -> np.ndarray:
    """Two-point Gauss length of straight segments p0 + t d, t in [0, 1].

    ``g_at`` maps x-coordinates to metric tensors; p0 and d have shape (..., 3).
    """
    total = 0.0
    for t in GAUSS2:
        g = g_at(p0[..., 0] + t * d[..., 0])
        total = total + 0.5 * np.sqrt(np.einsum("...i,...ij,...j->...", d, g, d))
    return total


def _assemble(dims, spacing, shear, params, label) -> CubicalMesh:
    nx, ny, nz = dims
    hx, hy, hz = spacing

    def g_at(x):
        return local_metric(shear(x))

    xv = np.arange(nx + 1) * hx
    xm = (np.arange(nx)[:, None] + GAUSS2[None, :]) * hx  # Gauss nodes in each x-cell
    per_plane = ny * nz

    # edges
    base = np.c_[xv, np.zeros_like(xv), np.zeros_like(xv)]
    ex = _segment_length(g_at, base[:-1], np.tile([hx, 0.0, 0.0], (nx, 1)))
    ey = _segment_length(g_at, base, np.tile([0.0, hy, 0.0], (nx + 1, 1)))
    ez = _segment_length(g_at, base, np.tile([0.0, 0.0, hz], (nx + 1, 1)))
    edge_weight = np.concatenate([np.repeat(ex, per_plane), np.repeat(ey, per_plane), np.repeat(ez, per_plane)])

    # faces: 2x2 Gauss of sqrt(det of the induced 2x2 metric)
    def face_area(x_nodes, a, b, ha, hb):
        g = g_at(x_nodes)
        det = g[..., a, a] * g[..., b, b] - g[..., a, b] ** 2
        return ha * hb * np.mean(np.sqrt(det), axis=-1)

    fxy = face_area(xm, 0, 1, hx, hy)
    fxz = face_area(xm, 0, 2, hx, hz)
    fyz = face_area(np.repeat(xv[:, None], 2, axis=1), 1, 2, hy, hz)
    face_weight = np.concatenate([np.repeat(fxy, per_plane), np.repeat(fxz, per_plane), np.repeat(fyz, per_plane)])

    g = g_at(xm)
    vol = hx * hy * hz * np.mean(np.sqrt(np.linalg.det(g)), axis=-1)
    cell_volume = np.repeat(vol, per_plane)
    return CubicalMesh(dims, spacing, shear, edge_weight, face_weight, cell_volume, params, label=label)


def min_resolution(params: MetricParams) -> tuple[int, int, int]:
    return (int(np.ceil(4 * params.j)), 8, 8)


def build_mesh(params: MetricParams, resolution: tuple[int, int, int]) -> CubicalMesh:
    nx, ny, nz = (int(r) for r in resolution)
    if nx < 4 * params.j:
        raise ValidationError(
            f"nx={nx} too coarse: need nx >= 4j = {4 * params.j:g} (two cells per unit of x-length)"
        )
    if ny < 8 or nz < 8:
        raise ValidationError(f"ny={ny}, nz={nz} too coarse: both must be >= 8")
    spacing = (params.length / nx, 1.0 / ny, 1.0 / nz)

    def shear(x):
        return hat_values(np.clip(x, 0.0, params.length), params, check=False)

    return _assemble((nx, ny, nz), spacing, shear, params, f"g_j(j={params.j:g})")


def flat_control_mesh(resolution: tuple[int, int, int], length_x: float = 1.0) -> CubicalMesh:
    """Flat product metric on [0, length_x] x T^2 (shear identically 0)."""
    nx, ny, nz = (int(r) for r in resolution)
    if min(nx, ny, nz) < 2:
        raise ValidationError("resolution must be at least 2 in every direction")
    spacing = (length_x / nx, 1.0 / ny, 1.0 / nz)
    return _assemble((nx, ny, nz), spacing, lambda x: np.zeros_like(np.asarray(x, dtype=float)), None, "flat")


def default_resolution(j: float, max_cells: int | None = None) -> tuple[tuple[int, int, int], bool]:
    """(max(32, 8j), max(16, 4j), 16); the flag is False if ``max_cells`` forced a coarser mesh."""
    nx = max(32, int(np.ceil(8 * j)))
    ny = max(16, int(np.ceil(4 * j)))
    nz = 16
    if max_cells is None or nx * ny * nz <= max_cells:
        return (nx, ny, nz), True
    scale = (max_cells / (nx * ny * nz)) ** 0.5
    nx = max(int(np.ceil(4 * j)), int(nx * scale))
    ny = max(8, int(ny * scale))
    return (nx, ny, nz), False
