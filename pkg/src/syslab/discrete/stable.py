"""Two-sided bounds on the stable norm of a torus class.

Upper bound: explicit cycles.  For a class alpha and an x-level, the
cheapest closed walk built from at most two distinct in-plane chords is a
loop representing alpha; a cycle in m * target is the sum of two such loops
(alpha at one level, m * target - alpha at another), and its length over m
bounds the stable norm from above.  The candidate splittings come from the
linear-programming relaxation over (level, chord) pairs, whose basic optimal
solutions use at most two chords.

Lower bound: closed 1-forms c dz + c' dy.  A loop in class (a, b) pairs to
a c + b c' with such a form, so that pairing divided by the largest pointwise
dual norm sqrt(c^2 + (c' + xh c)^2) is a lower bound.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from ..errors import ValidationError
from .mesh import CubicalMesh, WindingClass
from .paths import Stencil, build_stencil


@dataclass(frozen=True)
class StableNormBounds:
    lb: float
    ub: float
    target: WindingClass
    best_multiple: int
    best_split: tuple[WindingClass, WindingClass]
    detail: dict = field(default_factory=dict, compare=False)


class SlabWalks:
    """Cheapest single-level closed walks made of at most two chord types."""

    def __init__(self, mesh: CubicalMesh, stencil: Stencil):
        plane = stencil.in_plane
        self.vecs = stencil.moves[plane][:, 1:]  # (r, 2) offsets (dk, dl)
        self.w = stencil.weights[plane]  # (r, nx + 1)
        self.ny, self.nz = mesh.ny, mesh.nz
        r = len(self.vecs)
        p, q = np.triu_indices(r, k=1)
        det = self.vecs[p, 0] * self.vecs[q, 1] - self.vecs[p, 1] * self.vecs[q, 0]
        keep = det != 0
        self.p, self.q, self.det = p[keep], q[keep], det[keep]
        self._cache: dict[tuple[int, int], tuple[float, int]] = {}

    def length(self, cls: WindingClass) -> tuple[float, int]:
        """(length, x-level) of the cheapest walk in ``cls``; (0, -1) for the trivial class."""
        key = (cls.a, cls.b)
        if key in self._cache:
            return self._cache[key]
        if cls.is_trivial():
            return self._cache.setdefault(key, (0.0, -1))
        Dk, Dl = cls.b * self.ny, cls.a * self.nz
        s1, s2 = self.vecs[self.p], self.vecs[self.q]
        num1 = Dk * s2[:, 1] - Dl * s2[:, 0]
        num2 = s1[:, 0] * Dl - s1[:, 1] * Dk
        ok = (num1 % self.det == 0) & (num2 % self.det == 0)
        n1 = num1 // np.where(ok, self.det, 1)
        n2 = num2 // np.where(ok, self.det, 1)
        ok &= (n1 >= 0) & (n2 >= 0)
        if not np.any(ok):
            out = (np.inf, -1)
        else:
            cost = n1[ok, None] * self.w[self.p[ok]] + n2[ok, None] * self.w[self.q[ok]]
            with np.errstate(invalid="ignore"):
                per_level = np.min(cost, axis=0)
            lvl = int(np.argmin(per_level))
            out = (float(per_level[lvl]), lvl)
        self._cache[key] = out
        return out


def _lp_split(walks: SlabWalks, target: WindingClass) -> np.ndarray:
    """Fractional class carried by the first support level of the relaxed problem."""
    vecs, w = walks.vecs, walks.w
    r, nl = w.shape
    T = np.array([target.b * walks.ny, target.a * walks.nz], dtype=float)
    cost = w.T.ravel()  # variable (level, chord)
    A = np.tile(vecs.T.astype(float), (1, nl))
    res = linprog(cost, A_eq=A, b_eq=T, bounds=(0, None), method="highs")
    if res.status != 0:
        return np.zeros(2)
    y = res.x.reshape(nl, r)
    levels = np.flatnonzero(y.sum(axis=1) > 1e-9)
    if len(levels) == 0:
        return np.zeros(2)
    disp = y[levels[0]] @ vecs  # index displacement (dk, dl)
    return np.array([disp[1] / walks.nz, disp[0] / walks.ny])  # (a, b)


def _angle_lower_bound(target: WindingClass, s_min: float, s_max: float) -> tuple[float, float]:
    a, b = target.a, target.b

    def ratio(phi):
        c, cp = np.cos(phi), np.sin(phi)
        worst = np.maximum(np.abs(cp + s_min * c), np.abs(cp + s_max * c))
        return (a * c + b * cp) / np.sqrt(c * c + worst * worst)

    phis = np.linspace(-np.pi, np.pi, 7201)
    vals = ratio(phis)
    k = int(np.argmax(vals))
    lo, hi = phis[max(k - 1, 0)], phis[min(k + 1, len(phis) - 1)]
    opt = minimize_scalar(lambda t: -ratio(t), bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if -opt.fun > vals[k]:
        return float(-opt.fun), float(opt.x)
    return float(vals[k]), float(phis[k])


def stable_norm_bounds(
    mesh: CubicalMesh,
    target: WindingClass,
    max_multiple: int = 16,
    stencil: Stencil | None = None,
    x_samples: int = 64,
) -> StableNormBounds:
    if target.is_trivial():
        raise ValidationError("target class must be nonzero")
    if max_multiple < 1:
        raise ValidationError("max_multiple must be >= 1")
    st = stencil or build_stencil(mesh)
    walks = SlabWalks(mesh, st)

    split = _lp_split(walks, target)
    best = (np.inf, 1, WindingClass(0, 0), target)
    for m in range(1, max_multiple + 1):
        full = target.scaled(m)
        cands = {(0, 0)}
        fa, fb = m * split
        for da in (-1, 0, 1, 2):
            for db in (-1, 0, 1, 2):
                cands.add((int(np.floor(fa)) + da, int(np.floor(fb)) + db))
        for ca, cb in sorted(cands):
            alpha = WindingClass(ca, cb)
            beta = WindingClass(full.a - ca, full.b - cb)
            la, _ = walks.length(alpha)
            lb_, _ = walks.length(beta)
            val = (la + lb_) / m
            if val < best[0] - 1e-15:
                best = (val, m, alpha, beta)
    ub, m_best, alpha, beta = best

    # dense sampling of the shear over [0, 2j]
    nx, hx = mesh.nx, mesh.spacing[0]
    xs = np.linspace(0.0, nx * hx, nx * x_samples + 1)
    s = np.asarray(mesh.shear(xs), dtype=float)
    lb, phi = _angle_lower_bound(target, float(s.min()), float(s.max()))
    return StableNormBounds(
        lb, float(ub), target, m_best, (alpha, beta),
        {"phi": phi, "levels": (walks.length(alpha)[1], walks.length(beta)[1]), "lp_split": tuple(split)},
    )
