"""Numerical checks that psi_j calibrates the z-constant surfaces of g_j.

Three ingredients are verified separately: unit comass (sampling plus an
ascent over 2-planes), closedness (central differences of the coefficient
fields) and the Stokes-type pairing of psi_j with parameterized surface
patches, which is compared to the Riemannian area of the same patch.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DomainError
from .metric_family import (
    MetricParams,
    PointTI,
    form_matrix,
    hat_values,
    metric_tensor,
    psi_components,
)

FormEvaluator = Callable[[np.ndarray], np.ndarray]
Parameterization = Callable[[np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FormFieldSpec:
    """A 2-form field on T^2 x I together with the metric it is measured in.

    ``evaluator`` maps an ``(N, 3)`` array of points to ``(N, 3)`` arrays of
    (wxy, wxz, wyz); ``None`` selects psi_j.  ``extra_factor_volume``
    multiplies pairings; it stands for the product factors of w_j = psi_j ^
    dvol_K, which carry a fixed product metric and do not change comass.
    """

    params: MetricParams
    evaluator: Optional[FormEvaluator] = None
    extra_factor_volume: float = 1.0

    def components(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        if self.evaluator is None:
            return psi_components(pts[:, 0], self.params)
        out = np.asarray(self.evaluator(pts), dtype=float)
        if out.shape != pts.shape:
            raise ValueError(f"form evaluator returned shape {out.shape}, expected {pts.shape}")
        return out

    def scaled(self, c: float) -> "FormFieldSpec":
        base = self.components
        return FormFieldSpec(self.params, lambda pts: c * base(pts), self.extra_factor_volume)


def constant_form(params: MetricParams, w) -> FormFieldSpec:
    w = np.asarray(w, dtype=float)
    return FormFieldSpec(params, lambda pts: np.broadcast_to(w, pts.shape).copy())


@dataclass(frozen=True)
class SurfacePatch:
    """A map [0,1]^2 -> lifted coordinates (x, y, z), midpoint-sampled on nu x nv cells."""

    parameterization: Parameterization
    orientation: int = 1
    nu: int = 64
    nv: int = 16
    label: str = "patch"

    def __post_init__(self):
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        if self.nu < 8 or self.nv < 8:
            raise ValueError("patch resolution must be at least 8 x 8")

    def reversed(self) -> "SurfacePatch":
        return SurfacePatch(self.parameterization, -self.orientation, self.nu, self.nv, self.label)


def _x_cells(params: MetricParams) -> int:
    # even, so that x = j is a cell edge and the midpoint rule never straddles the kink
    return 2 * 64 * int(np.ceil(params.j))


def z_const_patch(params: MetricParams, z: float = 0.0, nu: int | None = None, nv: int = 8) -> SurfacePatch:
    L = params.length

    def f(u, v):
        return np.stack([L * u, v, np.full_like(u, z)], axis=-1)

    return SurfacePatch(f, 1, nu or _x_cells(params), nv, f"z={z:g}")


def y_const_patch(params: MetricParams, y: float = 0.0, nu: int | None = None, nv: int = 8) -> SurfacePatch:
    L = params.length

    def f(u, v):
        return np.stack([L * u, np.full_like(u, y), v], axis=-1)

    return SurfacePatch(f, 1, nu or _x_cells(params), nv, f"y={y:g}")


def tilted_patch(params: MetricParams, slope: float, nu: int | None = None, nv: int = 32) -> SurfacePatch:
    """The graph z = slope * y over [0, 2j] x S^1_y."""
    L = params.length

    def f(u, v):
        return np.stack([L * u, v, slope * v], axis=-1)

    return SurfacePatch(f, 1, nu or _x_cells(params), nv, f"z={slope:g}y")


# ---------------------------------------------------------------------------
# comass

@dataclass(frozen=True)
class ComassReport:
    max_value: float
    max_violation: float
    argmax_point: PointTI
    n_points: int
    passed: bool


def sample_points(params: MetricParams, n: int, rng: np.random.Generator) -> np.ndarray:
    pts = rng.random((n, 3))
    pts[:, 0] *= params.length
    return pts


def _normalize(v: np.ndarray) -> np.ndarray:
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / np.where(n > 0, n, 1.0)


def comass_by_ascent(
    W: np.ndarray,
    g: np.ndarray,
    rng: np.random.Generator,
    n_planes: int = 64,
    restarts: int = 32,
    iters: int = 8,
) -> np.ndarray:
    """Sup of w(X1, X2) over g-orthonormal pairs, per point.

    In a Cholesky frame g = L L^T the form becomes M = L^-1 W L^-T and
    orthonormal pairs become Euclidean ones.  ``n_planes`` random pairs are
    evaluated directly; ``restarts`` random starts are refined by alternating
    ascent u1 <- M u2 / |M u2|, u2 <- M^T u1 / |M^T u1|, which keeps the pair
    orthogonal because M is antisymmetric.
    """
    n = W.shape[0]
    L = np.linalg.cholesky(g)
    if not np.all(np.isfinite(L)):
        raise FloatingPointError("degenerate metric at a sample point")
    Linv = np.linalg.inv(L)
    M = Linv @ W @ np.swapaxes(Linv, -1, -2)

    # random orthonormal pairs
    a = _normalize(rng.standard_normal((n, n_planes, 3)))
    b = rng.standard_normal((n, n_planes, 3))
    b = _normalize(b - np.sum(a * b, axis=-1, keepdims=True) * a)
    best = np.max(np.einsum("npi,nij,npj->np", a, M, b), axis=1)

    u2 = _normalize(rng.standard_normal((n, restarts, 3)))
    for _ in range(iters):
        u1 = _normalize(np.einsum("nij,nrj->nri", M, u2))
        u2 = _normalize(np.einsum("nji,nrj->nri", M, u1))
    u1 = _normalize(np.einsum("nij,nrj->nri", M, u2))
    asc = np.max(np.einsum("nri,nij,nrj->nr", u1, M, u2), axis=1)
    return np.maximum(best, asc)


def verify_comass(
    spec: FormFieldSpec,
    n_points: int = 10_000,
    n_planes: int = 64,
    tol: float = 1e-6,
    seed: int = 0,
    restarts: int = 32,
    chunk: int = 2048,
) -> ComassReport:
    if n_points < 1 or n_planes < 1:
        raise ValueError("n_points and n_planes must be >= 1")
    rng = np.random.default_rng(seed)
    pts = sample_points(spec.params, n_points, rng)
    vals = np.empty(n_points)
    for s in range(0, n_points, chunk):
        p = pts[s : s + chunk]
        W = form_matrix(spec.components(p))
        g = metric_tensor(p[:, 0], spec.params)
        vals[s : s + chunk] = comass_by_ascent(W, g, rng, n_planes, restarts)
    k = int(np.argmax(vals))
    vmax = float(vals[k])
    viol = vmax - 1.0
    return ComassReport(vmax, viol, PointTI(*pts[k]), n_points, bool(viol <= tol))


# ---------------------------------------------------------------------------
# closedness

@dataclass(frozen=True)
class ClosedReport:
    max_residual: float
    n_points: int
    fd_step: float


# A fixed generic rotation.  In the (x, y, z) chart psi_j depends on x only and
# its dx^dy, dx^dz coefficients are never differentiated in x, so the residual
# would vanish identically; in a rotated chart every coefficient varies in
# every direction and the finite-difference residual is a genuine test.
def generic_rotation(seed: int = 1729) -> np.ndarray:
    q, r = np.linalg.qr(np.random.default_rng(seed).standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def exterior_derivative_fd(spec: FormFieldSpec, pts: np.ndarray, h: float, rot: np.ndarray | None = None) -> np.ndarray:
    """Central-difference coefficient of d(omega) = r dx^dy^dz at each point.

    ``rot`` = R selects the chart q with p = R q; the form is pulled back as
    W'(q) = R^T W(R q) R and the residual is computed from W'.  Since
    det R = 1 the result is chart independent up to truncation error.
    """
    pts = np.atleast_2d(np.asarray(pts, dtype=float))
    R = np.eye(3) if rot is None else np.asarray(rot, dtype=float)
    n = len(pts)
    deriv = np.zeros((n, 3, 3))  # deriv[:, k] = d/dq_k of (w'xy, w'xz, w'yz)
    for k in range(3):
        step = h * R[:, k]
        Wp = form_matrix(spec.components(pts + step))
        Wm = form_matrix(spec.components(pts - step))
        Dp = R.T @ Wp @ R
        Dm = R.T @ Wm @ R
        d = (Dp - Dm) / (2 * h)
        deriv[:, k] = np.stack([d[:, 0, 1], d[:, 0, 2], d[:, 1, 2]], axis=-1)
    return deriv[:, 2, 0] - deriv[:, 1, 1] + deriv[:, 0, 2]


def closedness_sample_points(params: MetricParams, n: int, margin: float, rng: np.random.Generator) -> np.ndarray:
    """Random points whose x lies at distance > margin from the boundary and from the smoothing band."""
    j, d = params.j, params.smoothing_delta
    lo1, hi1 = margin, j - d - margin
    lo2, hi2 = j + d + margin, 2 * j - margin
    if hi1 <= lo1:
        raise DomainError("fd stencil does not fit outside the smoothing band")
    pts = rng.random((n, 3))
    left = rng.random(n) < 0.5
    w1, w2 = hi1 - lo1, hi2 - lo2
    pts[:, 0] = np.where(left, lo1 + w1 * pts[:, 0], lo2 + w2 * pts[:, 0])
    return pts


def verify_closed(
    spec: FormFieldSpec,
    n_points: int = 2000,
    fd_step: float = 1e-3,
    seed: int = 0,
    rotated_chart: bool = True,
) -> ClosedReport:
    if fd_step <= 0:
        raise ValueError("fd_step must be positive")
    rng = np.random.default_rng(seed)
    pts = closedness_sample_points(spec.params, n_points, 2 * fd_step, rng)
    rot = generic_rotation() if rotated_chart else None
    res = exterior_derivative_fd(spec, pts, fd_step, rot)
    return ClosedReport(float(np.max(np.abs(res))), n_points, fd_step)


def closedness_order(spec: FormFieldSpec, fd_step: float = 1e-2, n_points: int = 500, seed: int = 0) -> tuple[float, float, float]:
    """(residual at h, residual at h/2, observed order) on a common point set."""
    rng = np.random.default_rng(seed)
    pts = closedness_sample_points(spec.params, n_points, 2 * fd_step, rng)
    rot = generic_rotation()
    r1 = float(np.max(np.abs(exterior_derivative_fd(spec, pts, fd_step, rot))))
    r2 = float(np.max(np.abs(exterior_derivative_fd(spec, pts, fd_step / 2, rot))))
    return r1, r2, float(np.log2(r1 / r2))


# ---------------------------------------------------------------------------
# pairing with surfaces

@dataclass(frozen=True)
class PatchIntegrals:
    pairing: float
    area: float
    degenerate_fraction: float


def _patch_samples(patch: SurfacePatch, eps: float = 1e-6):
    u = (np.arange(patch.nu) + 0.5) / patch.nu
    v = (np.arange(patch.nv) + 0.5) / patch.nv
    U, V = np.meshgrid(u, v, indexing="ij")
    U, V = U.ravel(), V.ravel()
    f = patch.parameterization
    pts = np.asarray(f(U, V), dtype=float)
    tu = (np.asarray(f(U + eps, V)) - np.asarray(f(U - eps, V))) / (2 * eps)
    tv = (np.asarray(f(U, V + eps)) - np.asarray(f(U, V - eps))) / (2 * eps)
    cell = 1.0 / (patch.nu * patch.nv)
    return pts, tu, tv, cell


def patch_integrals(spec: FormFieldSpec, patch: SurfacePatch, rank_tol: float = 1e-10) -> PatchIntegrals:
    pts, tu, tv, cell = _patch_samples(patch)
    W = form_matrix(spec.components(pts))
    g = metric_tensor(pts[:, 0], spec.params)
    pairing = np.einsum("ni,nij,nj->n", tu, W, tv)
    guu = np.einsum("ni,nij,nj->n", tu, g, tu)
    gvv = np.einsum("ni,nij,nj->n", tv, g, tv)
    guv = np.einsum("ni,nij,nj->n", tu, g, tv)
    gram = np.maximum(guu * gvv - guv**2, 0.0)
    degenerate = gram <= rank_tol * np.maximum(guu * gvv, 1e-300)
    total = patch.orientation * spec.extra_factor_volume * float(np.sum(pairing)) * cell
    area = spec.extra_factor_volume * float(np.sum(np.sqrt(gram))) * cell
    return PatchIntegrals(total, area, float(np.mean(degenerate)))


def pair_form_surface(spec: FormFieldSpec, patch: SurfacePatch, max_degenerate: float = 0.01) -> float:
    res = patch_integrals(spec, patch)
    if res.degenerate_fraction > max_degenerate:
        warnings.warn(
            f"patch {patch.label}: {res.degenerate_fraction:.1%} of samples have rank-deficient Jacobian",
            RuntimeWarning,
            stacklevel=2,
        )
    return res.pairing


def patch_area(spec: FormFieldSpec, patch: SurfacePatch) -> float:
    return patch_integrals(spec, patch).area


def calibration_defect(spec: FormFieldSpec, patch: SurfacePatch) -> float:
    res = patch_integrals(spec, patch)
    return res.area - res.pairing


def calibrated_area_closed_form(j: float) -> float:
    """Integral of sqrt(1 + xh^2) over [0, 2j] for the unsmoothed hat."""
    return float(j * np.sqrt(1 + j * j) + np.arcsinh(j))


def calibrated_area_quadrature(params: MetricParams, panels: int | None = None) -> float:
    """Same integral by Gauss-Legendre, valid with smoothing."""
    from .metric_family import default_x_panels, gauss_legendre_panels

    xs, wx = gauss_legendre_panels(0.0, params.length, panels or 2 * default_x_panels(params.j), 8)
    return float(np.sum(np.sqrt(1 + hat_values(xs, params) ** 2) * wx))


@dataclass
class CalibrationReport:
    comass_max: float
    d_residual: float
    defect_by_patch: dict = field(default_factory=dict)
    passed: bool = True


def calibration_report(
    params: MetricParams,
    n_points: int = 10_000,
    fd_step: float = 1e-3,
    seed: int = 0,
    tol: float = 1e-6,
    closed_tol: float = 1e-5,
    defect_tol: float = 1e-4,
) -> CalibrationReport:
    spec = FormFieldSpec(params)
    cm = verify_comass(spec, n_points=n_points, tol=tol, seed=seed)
    cl = verify_closed(spec, n_points=min(n_points, 2000), fd_step=fd_step, seed=seed)
    patches = [z_const_patch(params, z) for z in (0.0, 0.25, 0.5, 0.75)]
    patches.append(tilted_patch(params, 0.3))
    defects = {p.label: calibration_defect(spec, p) for p in patches}
    # the z-constant patches are calibrated; any patch obeys defect >= 0
    ok = cm.passed and cl.max_residual < closed_tol
    for p in patches:
        d = defects[p.label]
        ok &= d >= -tol * max(1.0, patch_area(spec, p))
        if p.label.startswith("z=") and "y" not in p.label:
            ok &= d <= defect_tol * patch_area(spec, p)
    return CalibrationReport(cm.max_value, cl.max_residual, defects, bool(ok))
