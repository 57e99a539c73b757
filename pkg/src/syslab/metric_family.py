"""The two-circle metric family on T^2 x I.

Coordinates are (x, y, z) with x in [0, 2j] and (y, z) in the unit square
torus.  The metric is

    g_j = dx^2 + dy^2 + (dz - xh dy)^2,    xh = hat(x) = min(x, 2j - x),

with the kink of ``hat`` at x = j optionally replaced by a C^2 smooth-min of
half-width ``smoothing_delta``.  Everything here is a pure function of its
arguments; the array-level helpers (``hat_values``, ``metric_tensor``,
``psi_components`` ...) broadcast over leading axes and back the scalar
operations that take ``PointTI`` values.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError

# slack for coordinates produced by floating point arithmetic at x = 0, 2j
_EDGE_SLACK = 1e-12


@dataclass(frozen=True)
class MetricParams:
    j: float
    smoothing_delta: float = 0.1

    def __post_init__(self):
        if not np.isfinite(self.j) or self.j < 1:
            raise DomainError(f"j must be >= 1, got {self.j}")
        if self.smoothing_delta < 0 or self.smoothing_delta >= self.j / 2:
            raise DomainError(
                f"smoothing_delta must lie in [0, j/2), got {self.smoothing_delta}"
            )

    @property
    def length(self) -> float:
        return 2.0 * self.j


@dataclass(frozen=True)
class PointTI:
    """A point of T^2 x I; y and z are reduced into [0, 1)."""

    x: float
    y: float
    z: float

    def __post_init__(self):
        object.__setattr__(self, "y", float(self.y) % 1.0)
        object.__setattr__(self, "z", float(self.z) % 1.0)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=float)


@dataclass(frozen=True)
class SymmetricBilinear3:
    gxx: float
    gxy: float
    gxz: float
    gyy: float
    gyz: float
    gzz: float

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "SymmetricBilinear3":
        m = np.asarray(m, dtype=float)
        return cls(m[0, 0], m[0, 1], m[0, 2], m[1, 1], m[1, 2], m[2, 2])

    def matrix(self) -> np.ndarray:
        return np.array(
            [
                [self.gxx, self.gxy, self.gxz],
                [self.gxy, self.gyy, self.gyz],
                [self.gxz, self.gyz, self.gzz],
            ]
        )

    def det(self) -> float:
        # cofactor expansion; exact for the integer-like entries of g_j
        return float(
            self.gxx * (self.gyy * self.gzz - self.gyz * self.gyz)
            - self.gxy * (self.gxy * self.gzz - self.gyz * self.gxz)
            + self.gxz * (self.gxy * self.gyz - self.gyy * self.gxz)
        )

    def is_positive_definite(self) -> bool:
        m = self.matrix()
        return bool(m[0, 0] > 0 and np.linalg.det(m[:2, :2]) > 0 and np.linalg.det(m) > 0)


@dataclass(frozen=True)
class TwoForm3:
    """Coefficients of dx^dy, dx^dz and dy^dz."""

    wxy: float
    wxz: float
    wyz: float

    def matrix(self) -> np.ndarray:
        return form_matrix(np.array([self.wxy, self.wxz, self.wyz]))

    def __call__(self, u, v) -> float:
        return float(np.asarray(u) @ self.matrix() @ np.asarray(v))

    def scaled(self, c: float) -> "TwoForm3":
        return TwoForm3(c * self.wxy, c * self.wxz, c * self.wyz)


@dataclass(frozen=True)
class CurvatureReport:
    max_abs_sectional: float
    sample_count: int
    fd_step: float


# ---------------------------------------------------------------------------
# array-level helpers

def _smooth_abs(t: np.ndarray, delta: float) -> np.ndarray:
    # even quartic matching |t| to second order at t = +-delta
    s = t / delta
    return delta * (0.375 + 0.75 * s**2 - 0.125 * s**4)


def hat_values(x, params: MetricParams, check: bool = True) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    j = params.j
    if check and (np.any(x < -_EDGE_SLACK) or np.any(x > 2 * j + _EDGE_SLACK)):
        raise DomainError(f"x outside [0, {2 * j}]")
    t = x - j
    out = j - np.abs(t)
    d = params.smoothing_delta
    if d > 0:
        band = np.abs(t) < d
        if np.any(band):
            out = np.where(band, j - _smooth_abs(t, d), out)
    return out


def metric_tensor(x, params: MetricParams, check: bool = True) -> np.ndarray:
    """Metric matrices of g_j at x-coordinates ``x``; shape ``x.shape + (3, 3)``."""
    xh = hat_values(x, params, check=check)
    g = np.zeros(xh.shape + (3, 3))
    g[..., 0, 0] = 1.0
    g[..., 1, 1] = 1.0 + xh**2
    g[..., 1, 2] = g[..., 2, 1] = -xh
    g[..., 2, 2] = 1.0
    return g


def coframe(x, params: MetricParams, check: bool = True) -> np.ndarray:
    """Orthonormal coframe e1 = dx, e2 = dy, e3 = dz - xh dy (rows)."""
    xh = hat_values(x, params, check=check)
    e = np.zeros(xh.shape + (3, 3))
    e[..., 0, 0] = 1.0
    e[..., 1, 1] = 1.0
    e[..., 2, 1] = -xh
    e[..., 2, 2] = 1.0
    return e


def form_matrix(w: np.ndarray) -> np.ndarray:
    """Antisymmetric matrix W with w(u, v) = u^T W v from (wxy, wxz, wyz)."""
    w = np.asarray(w, dtype=float)
    m = np.zeros(w.shape[:-1] + (3, 3))
    m[..., 0, 1], m[..., 0, 2], m[..., 1, 2] = w[..., 0], w[..., 1], w[..., 2]
    m[..., 1, 0], m[..., 2, 0], m[..., 2, 1] = -w[..., 0], -w[..., 1], -w[..., 2]
    return m


def form_components(m: np.ndarray) -> np.ndarray:
    return np.stack([m[..., 0, 1], m[..., 0, 2], m[..., 1, 2]], axis=-1)


# Hodge star on the coframe: *e1 = e2^e3, *e2 = e3^e1, *e3 = e1^e2
_STAR_PAIRS = ((1, 2), (2, 0), (0, 1))


def hodge_star_1form(alpha: np.ndarray, frame: np.ndarray) -> np.ndarray:
    """Hodge dual of a coordinate 1-form with respect to an orthonormal coframe.

    ``frame[..., p, a]`` is the a-th coordinate component of e^p.  The volume
    form e1^e2^e3 must equal dx^dy^dz (true for the coframe above).
    """
    alpha = np.asarray(alpha, dtype=float)
    # alpha = sum_p c_p e^p
    c = np.linalg.solve(np.swapaxes(frame, -1, -2), alpha[..., None])[..., 0]
    out = np.zeros(frame.shape[:-2] + (3, 3))
    for p, (q, r) in enumerate(_STAR_PAIRS):
        eq, er = frame[..., q, :], frame[..., r, :]
        wedge = eq[..., :, None] * er[..., None, :] - er[..., :, None] * eq[..., None, :]
        out += c[..., p, None, None] * wedge
    return form_components(out)


def psi_components(x, params: MetricParams, check: bool = True) -> np.ndarray:
    """(wxy, wxz, wyz) of psi_j = (1 + xh^2)^(-1/2) * dz."""
    x = np.asarray(x, dtype=float)
    frame = coframe(x, params, check=check)
    dz = np.broadcast_to(np.array([0.0, 0.0, 1.0]), x.shape + (3,))
    star = hodge_star_1form(dz, frame)
    xh = hat_values(x, params, check=False)
    return star / np.sqrt(1.0 + xh**2)[..., None]


def comass_closed_form(w: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Pointwise norm of a 3D 2-form, which equals its comass (every 2-form in 3D is simple)."""
    m = form_matrix(w)
    ginv = np.linalg.inv(g)
    sq = 0.5 * np.einsum("...ab,...cd,...ac,...bd->...", m, m, ginv, ginv)
    return np.sqrt(np.maximum(sq, 0.0))


# ---------------------------------------------------------------------------
# scalar operations

def _check_point(p: PointTI, params: MetricParams) -> None:
    if not (-_EDGE_SLACK <= p.x <= params.length + _EDGE_SLACK):
        raise DomainError(f"x = {p.x} outside [0, {params.length}]")


def hat(x: float, params: MetricParams) -> float:
    return float(hat_values(x, params))


def metric_at(p: PointTI, params: MetricParams) -> SymmetricBilinear3:
    _check_point(p, params)
    return SymmetricBilinear3.from_matrix(metric_tensor(p.x, params))


def psi_at(p: PointTI, params: MetricParams) -> TwoForm3:
    _check_point(p, params)
    w = psi_components(p.x, params)
    return TwoForm3(float(w[0]), float(w[1]), float(w[2]))


def gauss_legendre_panels(a: float, b: float, panels: int, order: int):
    """Nodes and weights of composite Gauss-Legendre on [a, b]."""
    t, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(a, b, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * t[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def default_x_panels(j: float) -> int:
    return 64 * int(np.ceil(j))


def total_volume(params: MetricParams, quadrature_order: int = 8, panels: int | None = None) -> float:
    """Riemannian volume of T^2 x I by composite Gauss-Legendre in x, y, z."""
    if quadrature_order < 2:
        raise DomainError("quadrature_order must be >= 2")
    panels = panels or default_x_panels(params.j)
    xs, wx = gauss_legendre_panels(0.0, params.length, panels, quadrature_order)
    ys, wy = gauss_legendre_panels(0.0, 1.0, 1, quadrature_order)
    zs, wz = gauss_legendre_panels(0.0, 1.0, 1, quadrature_order)
    # g_j does not depend on (y, z); the y/z rules still run so that the
    # integral is a genuine 3D tensor-product quadrature
    g = metric_tensor(xs, params)
    dens = np.sqrt(np.linalg.det(g))
    return float(np.einsum("i,i,j,k->", dens, wx, wy, wz))


def _lifted_samples(samples) -> np.ndarray:
    if isinstance(samples, np.ndarray):
        pts = np.asarray(samples, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError("samples array must have shape (N, 3)")
        return pts
    pts = np.array([p.as_array() for p in samples], dtype=float)
    if len(pts) < 2:
        return pts
    # minimal-image unwrapping of the periodic coordinates
    d = np.diff(pts[:, 1:], axis=0)
    d -= np.round(d)
    pts[1:, 1:] = pts[0, 1:] + np.cumsum(d, axis=0)
    return pts


def curve_length(samples, params: MetricParams) -> float:
    """Length of a sampled curve by the midpoint rule on each segment.

    ``samples`` is either a sequence of ``PointTI`` (consecutive samples must be
    within half a period in y and z so the unwrapping is unambiguous) or an
    ``(N, 3)`` array of already lifted coordinates.
    """
    pts = _lifted_samples(samples)
    if len(pts) < 2:
        raise ValueError("curve_length needs at least 2 samples")
    d = np.diff(pts, axis=0)
    if not isinstance(samples, np.ndarray) and np.any(np.abs(d[:, 1:]) > 0.5 + 1e-12):
        raise ValueError("consecutive samples must be within half a period")
    mid = 0.5 * (pts[1:] + pts[:-1])
    g = metric_tensor(mid[:, 0], params)
    seg = np.einsum("ni,nij,nj->n", d, g, d)
    return float(np.sum(np.sqrt(np.maximum(seg, 0.0))))


# ---------------------------------------------------------------------------
# curvature by finite differences

MetricField = Callable[[np.ndarray], np.ndarray]


def _fd_derivatives(metric_fn: MetricField, p: np.ndarray, h: float):
    """g, dg[c, a, b] = d_c g_ab and ddg[c, d, a, b] = d_c d_d g_ab at p."""
    e = np.eye(3) * h
    offsets = [np.zeros(3)]
    for c in range(3):
        offsets += [e[c], -e[c]]
    for c in range(3):
        for d in range(c + 1, 3):
            offsets += [e[c] + e[d], e[c] - e[d], -e[c] + e[d], -e[c] - e[d]]
    vals = metric_fn(p[None, :] + np.array(offsets))
    g0 = vals[0]
    dg = np.zeros((3, 3, 3))
    ddg = np.zeros((3, 3, 3, 3))
    for c in range(3):
        gp, gm = vals[1 + 2 * c], vals[2 + 2 * c]
        dg[c] = (gp - gm) / (2 * h)
        ddg[c, c] = (gp - 2 * g0 + gm) / h**2
    k = 7
    for c in range(3):
        for d in range(c + 1, 3):
            pp, pm, mp, mm = vals[k : k + 4]
            ddg[c, d] = ddg[d, c] = (pp - pm - mp + mm) / (4 * h**2)
            k += 4
    return g0, dg, ddg


def riemann_lower(metric_fn: MetricField, p, h: float) -> tuple[np.ndarray, np.ndarray]:
    """Fully covariant Riemann tensor R_iklm at p (R(u,v,u,v) > 0 on spheres)."""
    p = np.asarray(p, dtype=float)
    g, dg, ddg = _fd_derivatives(metric_fn, p, h)
    ginv = np.linalg.inv(g)
    # Gamma^e_bc = 1/2 g^ea (d_b g_ac + d_c g_ab - d_a g_bc)
    low = 0.5 * (np.einsum("bac->abc", dg) + np.einsum("cab->abc", dg) - dg)
    gam = np.einsum("ea,abc->ebc", ginv, low)
    # second derivative terms: 1/2 (g_im,kl + g_kl,im - g_il,km - g_km,il)
    r = 0.5 * (
        np.einsum("klim->iklm", ddg)
        + np.einsum("imkl->iklm", ddg)
        - np.einsum("kmil->iklm", ddg)
        - np.einsum("ilkm->iklm", ddg)
    )
    r += np.einsum("np,nkl,pim->iklm", g, gam, gam) - np.einsum("np,nkm,pil->iklm", g, gam, gam)
    return g, r


def sectional_curvature(g: np.ndarray, r: np.ndarray, u: np.ndarray, v: np.ndarray) -> float:
    num = np.einsum("iklm,i,k,l,m->", r, u, v, u, v)
    den = (u @ g @ u) * (v @ g @ v) - (u @ g @ v) ** 2
    return float(num / den)


def fixed_random_planes(n: int = 16, seed: int = 20020301) -> np.ndarray:
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n, 2, 3))


COORDINATE_PLANES = np.array(
    [[[1.0, 0, 0], [0, 1.0, 0]], [[1.0, 0, 0], [0, 0, 1.0]], [[0, 1.0, 0], [0, 0, 1.0]]]
)


def max_abs_sectional(metric_fn: MetricField, p, h: float, planes: np.ndarray | None = None) -> float:
    g, r = riemann_lower(metric_fn, p, h)
    if planes is None:
        planes = np.concatenate([COORDINATE_PLANES, fixed_random_planes()])
    return max(abs(sectional_curvature(g, r, u, v)) for u, v in planes)


def curvature_at(p: PointTI, params: MetricParams, fd_step: float = 1e-3) -> float:
    """Max |K| over the coordinate planes and 16 fixed random planes at p."""
    if not (0 < fd_step <= 0.1):
        raise DomainError("fd_step must lie in (0, 0.1]")
    if p.x < fd_step or p.x > params.length - fd_step:
        raise DomainError("point closer than fd_step to the boundary of I")

    def fn(pts):
        return metric_tensor(pts[:, 0], params)

    return max_abs_sectional(fn, p.as_array(), fd_step)


def curvature_report(
    params: MetricParams,
    xs: Sequence[float] | None = None,
    fd_step: float = 1e-3,
    exclude_band: bool = True,
) -> CurvatureReport:
    """Curvature sampled along x (the metric is invariant in y and z).

    Samples inside the smoothing band (plus the FD stencil) are skipped when
    ``exclude_band`` is set.
    """
    if xs is None:
        xs = np.concatenate([[fd_step], np.arange(0.25, params.length, 0.25)])
    pad = params.smoothing_delta + fd_step
    vals = []
    for x in xs:
        if exclude_band and abs(x - params.j) < pad + 1e-9:
            continue
        if x < fd_step or x > params.length - fd_step:
            continue
        vals.append(curvature_at(PointTI(x, 0.0, 0.0), params, fd_step))
    if not vals:
        raise DomainError("no admissible curvature samples")
    return CurvatureReport(max(vals), len(vals), fd_step)
