"""Shortest homologically nontrivial loops on the vertex graph of a mesh.

Lengths are measured on a chord graph over the mesh vertices: besides the
cubical edges, a vertex may jump to any vertex of its own x-level whose
(y, z) index offset is primitive with both entries at most ``CHORD_RADIUS``
in absolute value, and to the 3 x 3 neighbourhood of the adjacent x-levels.
Each chord costs the Riemannian length of the straight segment.  Without
the chords the graph distance is an l1-type norm that cannot follow the
sheared directions dz - xh dy, so the stable norm of the z-class would be
stuck at 1 instead of decaying like 1/j.

Nontrivial loops are found by Dijkstra on a finite periodic cover that
unrolls y and z ``2 * max_winding + 1`` times; a path from a lifted vertex
to one of its deck translates projects to a closed loop whose class is the
translation vector.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import gcd

import numba as nb
import numpy as np

from ..errors import ValidationError
from .mesh import GAUSS2, Chain, CubicalMesh, WindingClass, local_metric

CHORD_RADIUS = 4


@dataclass(frozen=True, eq=False)
class Stencil:
    moves: np.ndarray  # (m, 3) int64 offsets (di, dk, dl)
    weights: np.ndarray  # (m, nx + 1) segment length from each x-level; inf if out of range

    @property
    def in_plane(self) -> np.ndarray:
        return self.moves[:, 0] == 0


def chord_offsets(radius: int = CHORD_RADIUS) -> np.ndarray:
    out = []
    for dk in range(-radius, radius + 1):
        for dl in range(-radius, radius + 1):
            if (dk, dl) != (0, 0) and gcd(abs(dk), abs(dl)) == 1:
                out.append((0, dk, dl))
    for di in (-1, 1):
        for dk in (-1, 0, 1):
            for dl in (-1, 0, 1):
                out.append((di, dk, dl))
    return np.array(out, dtype=np.int64)


def build_stencil(mesh: CubicalMesh, radius: int = CHORD_RADIUS) -> Stencil:
    moves = chord_offsets(radius)
    hx, hy, hz = mesh.spacing
    nx = mesh.nx
    xs = np.arange(nx + 1) * hx
    d = moves * np.array([hx, hy, hz])  # (m, 3) coordinate displacement
    w = np.zeros((len(moves), nx + 1))
    for t in GAUSS2:
        x = xs[None, :] + t * d[:, 0:1]
        g = local_metric(mesh.shear(np.clip(x, 0.0, nx * hx)))
        w += 0.5 * np.sqrt(np.einsum("mi,mnij,mj->mn", d, g, d))
    target = np.arange(nx + 1)[None, :] + moves[:, 0:1]
    w[(target < 0) | (target > nx)] = np.inf
    return Stencil(moves, w)


# ---------------------------------------------------------------------------
# numba kernels

@nb.njit(cache=True)
def _heap_push(hk, hv, size, key, val):
    if size == hk.shape[0]:
        nk = np.empty(2 * size, hk.dtype)
        nv = np.empty(2 * size, hv.dtype)
        nk[:size] = hk
        nv[:size] = hv
        hk, hv = nk, nv
    pos = size
    hk[pos] = key
    hv[pos] = val
    while pos > 0:
        parent = (pos - 1) >> 1
        if hk[parent] < hk[pos] or (hk[parent] == hk[pos] and hv[parent] <= hv[pos]):
            break
        hk[parent], hk[pos] = hk[pos], hk[parent]
        hv[parent], hv[pos] = hv[pos], hv[parent]
        pos = parent
    return hk, hv, size + 1


@nb.njit(cache=True)
def _heap_pop(hk, hv, size):
    key, val = hk[0], hv[0]
    size -= 1
    hk[0] = hk[size]
    hv[0] = hv[size]
    pos = 0
    while True:
        c = 2 * pos + 1
        if c >= size:
            break
        if c + 1 < size and (hk[c + 1] < hk[c] or (hk[c + 1] == hk[c] and hv[c + 1] < hv[c])):
            c += 1
        if hk[pos] < hk[c] or (hk[pos] == hk[c] and hv[pos] <= hv[c]):
            break
        hk[pos], hk[c] = hk[c], hk[pos]
        hv[pos], hv[c] = hv[c], hv[pos]
        pos = c
    return key, val, size


@nb.njit(cache=True)
def _sssp(nx1, NY, NZ, moves, W, src, cutoff, dist):
    """Dijkstra on the periodic (NY, NZ) vertex grid; fills ``dist`` up to cutoff."""
    hk = np.empty(1024, np.float64)
    hv = np.empty(1024, np.int64)
    size = 0
    dist[src] = 0.0
    hk, hv, size = _heap_push(hk, hv, size, 0.0, src)
    nm = moves.shape[0]
    while size > 0:
        d, u, size = _heap_pop(hk, hv, size)
        if d > dist[u] or d > cutoff:
            continue
        L = u % NZ
        K = (u // NZ) % NY
        i = u // (NY * NZ)
        for m in range(nm):
            w = W[m, i]
            if not np.isfinite(w):
                continue
            nd = d + w
            if nd > cutoff:
                continue
            i2 = i + moves[m, 0]
            K2 = (K + moves[m, 1]) % NY
            L2 = (L + moves[m, 2]) % NZ
            v = (i2 * NY + K2) * NZ + L2
            if nd < dist[v]:
                dist[v] = nd
                hk, hv, size = _heap_push(hk, hv, size, nd, v)
    return dist


@nb.njit(cache=True)
def _cover_search(nx1, ny, nz, C, moves, W, i0, bound, rtol, dist, pred, touched):
    """Shortest paths from (i0, 0, 0) to its deck translates in the C x C cover.

    Returns the (updated) bound, arrays of (distance, K, L) for every translate
    reached within bound * (1 + rtol), and the move sequences of those paths.
    ``dist``/``pred`` must be +inf/-1 on entry and are restored on exit.
    """
    NY = C * ny
    NZ = C * nz
    hk = np.empty(4096, np.float64)
    hv = np.empty(4096, np.int64)
    size = 0
    nt = 0
    src = (i0 * NY) * NZ
    dist[src] = 0.0
    touched[nt] = src
    nt += 1
    hk, hv, size = _heap_push(hk, hv, size, 0.0, src)
    nm = moves.shape[0]
    fd = np.empty(64, np.float64)
    fv = np.empty(64, np.int64)
    nf = 0
    while size > 0:
        d, u, size = _heap_pop(hk, hv, size)
        if d > dist[u]:
            continue
        if d > bound * (1.0 + rtol):
            break
        L = u % NZ
        K = (u // NZ) % NY
        i = u // (NY * NZ)
        if u != src and i == i0 and K % ny == 0 and L % nz == 0:
            if nf == fd.shape[0]:
                fd2 = np.empty(2 * nf, np.float64)
                fv2 = np.empty(2 * nf, np.int64)
                fd2[:nf] = fd
                fv2[:nf] = fv
                fd, fv = fd2, fv2
            fd[nf] = d
            fv[nf] = u
            nf += 1
            if d < bound:
                bound = d
            continue  # paths through a translate are never shorter than their prefix
        for m in range(nm):
            w = W[m, i]
            if not np.isfinite(w):
                continue
            nd = d + w
            if nd > bound * (1.0 + rtol):
                continue
            i2 = i + moves[m, 0]
            K2 = (K + moves[m, 1]) % NY
            L2 = (L + moves[m, 2]) % NZ
            v = (i2 * NY + K2) * NZ + L2
            if nd < dist[v]:
                if dist[v] == np.inf:
                    if nt == touched.shape[0]:
                        t2 = np.empty(2 * nt, np.int64)
                        t2[:nt] = touched
                        touched = t2
                    touched[nt] = v
                    nt += 1
                dist[v] = nd
                pred[v] = m
                hk, hv, size = _heap_push(hk, hv, size, nd, v)

    # reconstruct move sequences
    ptr = np.zeros(nf + 1, np.int64)
    total = 0
    for f in range(nf):
        v = fv[f]
        steps = 0
        while v != src:
            m = pred[v]
            i = v // (NY * NZ)
            K = (v // NZ) % NY
            L = v % NZ
            v = ((i - moves[m, 0]) * NY + (K - moves[m, 1]) % NY) * NZ + (L - moves[m, 2]) % NZ
            steps += 1
        total += steps
        ptr[f + 1] = total
    seq = np.empty(total, np.int64)
    for f in range(nf):
        v = fv[f]
        pos = ptr[f + 1] - 1
        while v != src:
            m = pred[v]
            seq[pos] = m
            pos -= 1
            i = v // (NY * NZ)
            K = (v // NZ) % NY
            L = v % NZ
            v = ((i - moves[m, 0]) * NY + (K - moves[m, 1]) % NY) * NZ + (L - moves[m, 2]) % NZ

    for t in range(nt):
        dist[touched[t]] = np.inf
        pred[touched[t]] = -1
    return bound, fd[:nf], fv[:nf], ptr, seq, touched


# ---------------------------------------------------------------------------
# loops and chains

@dataclass(frozen=True, eq=False)
class Loop:
    """A closed walk on the chord graph, stored as a start vertex and moves."""

    start: tuple[int, int, int]
    moves: np.ndarray  # (n, 3) offsets
    length: float

    def lifted_vertices(self) -> np.ndarray:
        pts = np.vstack([np.zeros((1, 3), np.int64), np.cumsum(self.moves, axis=0)])
        return pts + np.array(self.start)

    def displacement(self) -> np.ndarray:
        return self.moves.sum(axis=0)

    def winding(self, mesh: CubicalMesh) -> WindingClass:
        _, dk, dl = self.displacement()
        return WindingClass(int(dl // mesh.nz), int(dk // mesh.ny))

    def translated(self, dk: int, dl: int) -> "Loop":
        i, k, l = self.start
        return Loop((i, k + dk, l + dl), self.moves, self.length)


def loop_to_chain(loop: Loop, mesh: CubicalMesh) -> Chain:
    """Staircase the chords into cubical edges: x first, then y, then z."""
    idx, coef = [], []
    i, k, l = loop.start
    for di, dk, dl in loop.moves:
        if di == 1:
            idx.append(mesh.edge_index(0, i, k, l))
            coef.append(1)
        elif di == -1:
            idx.append(mesh.edge_index(0, i - 1, k, l))
            coef.append(-1)
        i += di
        s = 1 if dk > 0 else -1
        for _ in range(abs(dk)):
            if s > 0:
                idx.append(mesh.edge_index(1, i, k, l))
            else:
                idx.append(mesh.edge_index(1, i, k - 1, l))
            coef.append(s)
            k += s
        s = 1 if dl > 0 else -1
        for _ in range(abs(dl)):
            if s > 0:
                idx.append(mesh.edge_index(2, i, k, l))
            else:
                idx.append(mesh.edge_index(2, i, k, l - 1))
            coef.append(s)
            l += s
    return Chain(1, np.array(idx, dtype=np.int64), np.array(coef, dtype=np.int64))


def _translate_chain(chain: Chain, mesh: CubicalMesh, dk: int, dl: int) -> Chain:
    axis, i, k, l = mesh.edge_info(chain.indices)
    off = np.asarray(mesh.edge_offsets)[axis]
    idx = off + mesh.vertex_index(i, k + dk, l + dl)
    return Chain(1, idx, chain.coefficients, chain.ring, chain.relative)


def canonical_translate(loop: Loop, mesh: CubicalMesh) -> tuple[Loop, Chain]:
    """Translate in (y, z) so the sorted edge-index list is lexicographically smallest."""
    chain = loop_to_chain(loop, mesh)
    axis, i, k, l = mesh.edge_info(chain.indices)
    # the smallest reachable first index puts an edge of the lowest (axis, i)
    # at k = l = 0; only those translations can win
    key = axis * (mesh.nx + 2) + i
    sel = key == key.min()
    best = None
    for kk, ll in sorted(set(zip(k[sel].tolist(), l[sel].tolist()))):
        c = _translate_chain(chain, mesh, -kk, -ll)
        if best is None or _lex_less(c.indices, best[1].indices):
            best = (loop.translated(-kk, -ll), c)
    return best


def _lex_less(a: np.ndarray, b: np.ndarray) -> bool:
    n = min(len(a), len(b))
    diff = np.flatnonzero(a[:n] != b[:n])
    if len(diff):
        return bool(a[diff[0]] < b[diff[0]])
    return len(a) < len(b)


@dataclass(frozen=True, eq=False)
class SystoleResult:
    value: float
    witness: Chain
    winding: WindingClass
    lower_bound_certificate: float | None = None
    loop: Loop | None = None
    extra: dict = field(default_factory=dict)


def _is_symmetric(W: np.ndarray, moves: np.ndarray) -> bool:
    # weights invariant under i -> nx - i with di -> -di
    nx1 = W.shape[1]
    lookup = {tuple(m): r for r, m in enumerate(moves.tolist())}
    for r, (di, dk, dl) in enumerate(moves.tolist()):
        r2 = lookup[(-di, dk, dl)]
        a = W[r]
        b = W[r2][::-1]
        fin = np.isfinite(a)
        if not np.array_equal(fin, np.isfinite(b)):
            return False
        if not np.allclose(a[fin], b[fin], rtol=1e-13, atol=0):
            return False
    return nx1 > 0


def shortest_nontrivial_cycle(
    mesh: CubicalMesh,
    max_winding: int = 2,
    stencil: Stencil | None = None,
    rtol: float = 1e-9,
) -> SystoleResult:
    """Shortest loop in any nonzero class with windings at most ``max_winding``.

    Paths exit early once they exceed the best loop found so far, seeded with
    the straight y- and z-circles.  Loops within a relative ``rtol`` of the
    optimum count as ties; among ties the loop whose cubical staircase has the
    lexicographically smallest sorted edge-index list (over all (y, z)
    translates) is returned.
    """
    if max_winding < 1:
        raise ValidationError("max_winding must be >= 1")
    st = stencil or build_stencil(mesh)
    nx, ny, nz = mesh.dims
    C = 2 * max_winding + 1
    moves, W = st.moves, st.weights

    # seed: straight circles at every x-level
    zrow = np.flatnonzero((moves == [0, 0, 1]).all(axis=1))[0]
    yrow = np.flatnonzero((moves == [0, 1, 0]).all(axis=1))[0]
    bound = float(min(np.min(W[zrow]) * nz, np.min(W[yrow]) * ny))

    sources = np.arange(nx + 1)
    if _is_symmetric(W, moves):
        sources = sources[: nx // 2 + 1]

    NV = (nx + 1) * (C * ny) * (C * nz)
    dist = np.full(NV, np.inf)
    pred = np.full(NV, -1, dtype=np.int64)
    touched = np.empty(1 << 16, np.int64)
    found = []
    for i0 in sources:
        bound, fd, fv, ptr, seq, touched = _cover_search(
            nx + 1, ny, nz, C, moves, W, int(i0), bound, rtol, dist, pred, touched
        )
        for f in range(len(fd)):
            found.append((float(fd[f]), int(i0), moves[seq[ptr[f] : ptr[f + 1]]]))
    best_val = min(f[0] for f in found)
    ties = [f for f in found if f[0] <= best_val * (1 + rtol)]
    chosen = None
    for d, i0, mv in ties:
        loop = Loop((i0, 0, 0), mv, d)
        loop, chain = canonical_translate(loop, mesh)
        if chosen is None or _lex_less(chain.indices, chosen[1].indices):
            chosen = (loop, chain)
    loop, chain = chosen
    return SystoleResult(best_val, chain, loop.winding(mesh), None, loop, {"ties": len(ties)})


# ---------------------------------------------------------------------------
# ball mass

def vertex_distances(mesh: CubicalMesh, center: int, cutoff: float, stencil: Stencil | None = None) -> np.ndarray:
    st = stencil or build_stencil(mesh)
    dist = np.full(mesh.n_vertices, np.inf)
    return _sssp(mesh.nx + 1, mesh.ny, mesh.nz, st.moves, st.weights, int(center), float(cutoff), dist)


def ball_mass(chain: Chain, center: int, r: float, mesh: CubicalMesh, stencil: Stencil | None = None) -> float:
    """Length of the part of a 1-chain inside the metric ball B(center, r).

    Distances come from Dijkstra on the chord graph.  A point at arclength t
    on an edge (u, v) of weight w is inside when min(d_u + t, d_v + w - t) <= r.
    """
    if chain.dimension != 1:
        raise ValidationError("ball_mass expects a 1-chain")
    if not (0 <= r < 1):
        raise ValidationError("radius must lie in [0, 1)")
    tails, heads = _edge_endpoints(chain.indices, mesh)
    if center not in set(tails.tolist()) | set(heads.tolist()):
        raise ValidationError(f"center vertex {center} is not on the chain")
    dist = vertex_distances(mesh, center, r, stencil)
    w = mesh.edge_weight[chain.indices]
    du, dv = dist[tails], dist[heads]
    a = np.clip(r - du, 0.0, w)  # [0, a] inside from the tail side
    b = np.clip(r - dv, 0.0, w)  # [w - b, w] inside from the head side
    inside = np.minimum(a + b, w)
    return float(np.sum(np.abs(chain.coefficients) * inside))


def _edge_endpoints(edges: np.ndarray, mesh: CubicalMesh):
    axis, i, k, l = mesh.edge_info(edges)
    tail = mesh.vertex_index(i, k, l)
    step = np.eye(3, dtype=np.int64)[axis]
    head = mesh.vertex_index(i + step[:, 0], k + step[:, 1], l + step[:, 2])
    return tail, head


def loop_start_vertex(result: SystoleResult, mesh: CubicalMesh) -> int:
    if result.loop is None:
        raise ValidationError("result carries no loop")
    i, k, l = result.loop.start
    return int(mesh.vertex_index(i, k, l))
