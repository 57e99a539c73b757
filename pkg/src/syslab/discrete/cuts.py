"""Minimal relative 2-cycles by min cut, their calibration certificates and
algebraic intersection numbers with 1-cycles.

For the dz-class the torus is cut open along the plane z = 0: every cube of
the bottom layer is fed from a source through its lower face, every cube of
the top layer drains into a sink through its upper face (the same plane by
periodicity) and interior faces become undirected arcs.  The yz-faces on
x = 0 and x = 2j carry no arc, so the surfaces found are relative cycles.
If A is the source side, the cut is the face chain P + d(A) (dz) or
P - d(A) (dy) with P the slicing plane, restricted to interior faces.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from ..errors import ValidationError
from ..metric_family import hodge_star_1form
from .maxflow import build_flow_graph, min_cut
from .mesh import GAUSS2, Chain, CubicalMesh, WindingClass
from .paths import SystoleResult

DIRECTIONS = ("dz", "dy")


def _cube(mesh: CubicalMesh, i, k, l):
    return mesh.vertex_index(i, k, l)


def _dual_arcs(mesh: CubicalMesh, direction: str, slab: int | None = None):
    """(tails, heads, caps) of interior dual arcs plus source/sink link faces.

    With ``slab`` set only the cubes of that x-layer are used and yz-faces are
    skipped (the 2D cross-section problem).
    """
    nx, ny, nz = mesh.dims
    fw = mesh.face_weight
    irange = np.arange(nx) if slab is None else np.array([slab])
    I, K, L = np.meshgrid(irange, np.arange(ny), np.arange(nz), indexing="ij")
    tails, heads, caps = [], [], []

    if slab is None and nx > 1:
        Ii, Ki, Li = np.meshgrid(np.arange(1, nx), np.arange(ny), np.arange(nz), indexing="ij")
        tails.append(_cube(mesh, Ii - 1, Ki, Li).ravel())
        heads.append(_cube(mesh, Ii, Ki, Li).ravel())
        caps.append(fw[mesh.face_index("yz", Ii, Ki, Li)].ravel())

    # xz-faces separate k-1 and k; xy-faces separate l-1 and l
    cut_k = (K == 0) if direction == "dy" else np.zeros_like(K, bool)
    cut_l = (L == 0) if direction == "dz" else np.zeros_like(L, bool)
    keep = ~cut_k
    tails.append(_cube(mesh, I, K - 1, L)[keep])
    heads.append(_cube(mesh, I, K, L)[keep])
    caps.append(fw[mesh.face_index("xz", I, K, L)][keep])
    keep = ~cut_l
    tails.append(_cube(mesh, I, K, L - 1)[keep])
    heads.append(_cube(mesh, I, K, L)[keep])
    caps.append(fw[mesh.face_index("xy", I, K, L)][keep])

    if direction == "dz":
        first = _cube(mesh, I[..., 0], K[..., 0], 0).ravel()
        last = _cube(mesh, I[..., 0], K[..., 0], nz - 1).ravel()
        link = fw[mesh.face_index("xy", I[..., 0], K[..., 0], 0)].ravel()
    else:
        first = _cube(mesh, I[:, 0, :], 0, L[:, 0, :]).ravel()
        last = _cube(mesh, I[:, 0, :], ny - 1, L[:, 0, :]).ravel()
        link = fw[mesh.face_index("xz", I[:, 0, :], 0, L[:, 0, :])].ravel()
    return (np.concatenate(tails), np.concatenate(heads), np.concatenate(caps)), (first, last, link)


def _solve(mesh: CubicalMesh, direction: str, slab: int | None = None):
    if direction not in DIRECTIONS:
        raise ValidationError(f"dual_direction must be one of {DIRECTIONS}")
    (t, h, c), (first, last, link) = _dual_arcs(mesh, direction, slab)
    # compress node ids to the cubes in use, then S and T
    used = np.unique(np.concatenate([t, h, first, last]))
    remap = {int(v): r for r, v in enumerate(used)}
    look = np.vectorize(remap.__getitem__, otypes=[np.int64])
    n = len(used) + 2
    S, T = n - 2, n - 1
    tails = np.concatenate([look(t), np.full(len(first), S), look(last)])
    heads = np.concatenate([look(h), look(first), np.full(len(last), T)])
    fwd = np.concatenate([c, link, link])
    bwd = np.concatenate([c, np.zeros(len(link)), np.zeros(len(link))])
    adj = sp.coo_matrix((np.ones(len(tails)), (tails, heads)), shape=(n, n))
    _, lab = connected_components(adj, directed=False)
    if lab[S] != lab[T]:
        raise RuntimeError("dual graph is disconnected: source and sink lie in different components")
    g = build_flow_graph(n, tails, heads, fwd, bwd)
    res = min_cut(g, S, T)
    source_cubes = used[res.source_side[: len(used)]]
    return res.value, source_cubes


def _cut_chain(mesh: CubicalMesh, direction: str, source_cubes: np.ndarray) -> Chain:
    nx, ny, nz = mesh.dims
    if direction == "dz":
        I, K = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
        plane = mesh.face_index("xy", I, K, 0).ravel()
        sign = 1
    else:
        I, L = np.meshgrid(np.arange(nx), np.arange(nz), indexing="ij")
        plane = mesh.face_index("xz", I, 0, L).ravel()
        sign = -1
    a = np.zeros(mesh.n_cubes, dtype=np.int64)
    a[source_cubes] = 1
    dense = np.zeros(mesh.n_faces, dtype=np.int64)
    dense[plane] += 1
    dense += sign * (mesh.d3 @ a)
    dense[mesh.boundary_face_mask()] = 0
    return Chain.from_dense(2, dense, "Z", relative=True)


# ---------------------------------------------------------------------------
# calibration certificates

def calibrating_components(mesh: CubicalMesh, direction: str, x: np.ndarray) -> np.ndarray:
    """(wxy, wxz, wyz) of the calibrating form of each dual class at x.

    dz: psi = *dz / sqrt(1 + s^2); dy: -*dy = dx ^ (dz - s dy), the sign
    matching the e_x ^ e_z orientation of the slicing plane y = 0.  Both come
    from the coframe dx, dy, dz - s dy.
    """
    s = np.asarray(mesh.shear(x), dtype=float)
    frame = np.zeros(s.shape + (3, 3))
    frame[..., 0, 0] = 1.0
    frame[..., 1, 1] = 1.0
    frame[..., 2, 1] = -s
    frame[..., 2, 2] = 1.0
    one = np.zeros(s.shape + (3,))
    if direction == "dz":
        one[..., 2] = 1.0
    else:
        one[..., 1] = 1.0
    star = hodge_star_1form(one, frame)
    # |dz| = sqrt(1 + s^2) and |dy| = 1 in g; *alpha has the same norm
    scale = np.sqrt(1.0 + s * s) if direction == "dz" else -np.ones_like(s)
    return star / scale[..., None]


def pair_form_chain(mesh: CubicalMesh, chain: Chain, direction: str = "dz") -> float:
    """Face-by-face pairing of the calibrating form with a 2-chain.

    Uses the 2 x 2 Gauss nodes of the face weights, so that the pointwise
    comass bound gives weight(chain) >= pairing face by face.
    """
    if chain.dimension != 2:
        raise ValidationError("pair_form_chain expects a 2-chain")
    kind, i, k, l = mesh.face_info(chain.indices)
    hx, hy, hz = mesh.spacing
    x0 = i * hx
    val = np.zeros(len(chain))
    for t in GAUSS2:
        xg = np.where(kind == 2, x0, x0 + t * hx)
        w = calibrating_components(mesh, direction, xg)
        val += 0.5 * np.choose(kind, [w[:, 0] * hx * hy, w[:, 1] * hx * hz, w[:, 2] * hy * hz])
    return float(np.sum(chain.coefficients * val))


def min_relative_2cycle(mesh: CubicalMesh, dual_direction: str = "dz") -> SystoleResult:
    value, src = _solve(mesh, dual_direction)
    chain = _cut_chain(mesh, dual_direction, src)
    cert = pair_form_chain(mesh, chain, dual_direction)
    cls = WindingClass(1, 0) if dual_direction == "dz" else WindingClass(0, 1)
    return SystoleResult(value, chain, cls, cert, None, {"chain_weight": chain.weight(mesh)})


def slab_cut_values(mesh: CubicalMesh, dual_direction: str = "dz") -> np.ndarray:
    """Minimal separating cross-section weight in each x-layer of cubes."""
    return np.array([_solve(mesh, dual_direction, slab=i)[0] for i in range(mesh.nx)])


def coarea_check(mesh: CubicalMesh, chain: Chain, dual_direction: str = "dz") -> tuple[float, float]:
    """(in-layer weight of chain, sum of per-layer minimal cross-sections)."""
    kind, *_ = mesh.face_info(chain.indices)
    inlayer = kind < 2
    w = float(np.sum(np.abs(chain.coefficients[inlayer]) * mesh.face_weight[chain.indices[inlayer]]))
    return w, float(np.sum(slab_cut_values(mesh, dual_direction)))


# ---------------------------------------------------------------------------
# intersection numbers

def intersection_number(c1: Chain, c2: Chain, mesh: CubicalMesh) -> int:
    """Algebraic intersection of a 1-cycle with a relative 2-cycle.

    c1 is pushed off the lattice by (sigma * eps, eps, eps) with sigma = +1
    unless c1 touches x = 2j (then -1); after the shift every edge meets face
    interiors only: z-edges cross xy-faces (+1), x-edges cross yz-faces (+1)
    and y-edges cross xz-faces (-1), signs relative to dx ^ dy ^ dz.
    """
    if c1.dimension != 1 or c2.dimension != 2:
        raise ValidationError("intersection_number expects a 1-chain and a 2-chain")
    if not c1.is_cycle(mesh):
        raise ValidationError("first argument is not a cycle")
    if not Chain(2, c2.indices, c2.coefficients, c2.ring, True).is_cycle(mesh):
        raise ValidationError("second argument is not a relative cycle")
    axis, i, k, l = mesh.edge_info(c1.indices)
    tails_i = i
    heads_i = i + (axis == 0)
    touches_right = np.any(heads_i == mesh.nx) or np.any(tails_i == mesh.nx)
    touches_left = np.any(tails_i == 0)
    if not touches_right:
        sigma = 1
    elif not touches_left:
        sigma = -1
    else:
        raise ValidationError("1-cycle touches both boundary components; cannot perturb transversally")

    faces, signs, coef = [], [], []
    for ax, kind, sgn in ((2, "xy", 1), (0, "yz", 1), (1, "xz", -1)):
        sel = axis == ax
        if not np.any(sel):
            continue
        ii, kk, ll = i[sel], k[sel], l[sel]
        if ax == 2:
            fi = ii if sigma == 1 else ii - 1
            f = mesh.face_index(kind, fi, kk, ll + 1)
        elif ax == 0:
            fi = ii + 1 if sigma == 1 else ii
            f = mesh.face_index(kind, fi, kk, ll)
        else:
            fi = ii if sigma == 1 else ii - 1
            f = mesh.face_index(kind, fi, kk + 1, ll)
        faces.append(np.asarray(f))
        signs.append(np.full(sel.sum(), sgn))
        coef.append(c1.coefficients[sel])
    if not faces:
        return 0
    faces = np.concatenate(faces)
    weight = np.concatenate(signs) * np.concatenate(coef)
    dense = c2.dense(mesh.n_faces)
    total = int(np.sum(weight * dense[faces]))
    if c1.ring == "Z2" or c2.ring == "Z2":
        total %= 2
    return total


def z_circle(mesh: CubicalMesh, i: int = 0, k: int = 0) -> Chain:
    l = np.arange(mesh.nz)
    return Chain(1, mesh.edge_index(2, i, k, l), np.ones(mesh.nz, np.int64))


def y_circle(mesh: CubicalMesh, i: int = 0, l: int = 0) -> Chain:
    k = np.arange(mesh.ny)
    return Chain(1, mesh.edge_index(1, i, k, l), np.ones(mesh.ny, np.int64))


def plane_chain(mesh: CubicalMesh, dual_direction: str, level: int = 0) -> Chain:
    if dual_direction == "dz":
        I, K = np.meshgrid(np.arange(mesh.nx), np.arange(mesh.ny), indexing="ij")
        f = mesh.face_index("xy", I, K, level).ravel()
    else:
        I, L = np.meshgrid(np.arange(mesh.nx), np.arange(mesh.nz), indexing="ij")
        f = mesh.face_index("xz", I, level, L).ravel()
    return Chain(2, f, np.ones(len(f), np.int64), relative=True)
