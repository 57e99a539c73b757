from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syslab.calibration import (
    FormFieldSpec,
    SurfacePatch,
    calibrated_area_closed_form,
    calibrated_area_quadrature,
    calibration_defect,
    calibration_report,
    closedness_order,
    comass_by_ascent,
    constant_form,
    pair_form_surface,
    patch_area,
    tilted_patch,
    verify_closed,
    verify_comass,
    y_const_patch,
    z_const_patch,
)
from syslab.metric_family import MetricParams, hat_values


def test_comass_of_psi_is_one():
    r = verify_comass(FormFieldSpec(MetricParams(4)), n_points=10_000)
    assert r.max_violation <= 1e-6
    assert r.max_value >= 1 - 1e-6
    assert r.passed


def test_comass_of_zero_form():
    r = verify_comass(constant_form(MetricParams(2), [0, 0, 0]), n_points=200)
    assert r.max_value == 0.0
    assert r.max_violation == -1.0


def test_comass_scales_linearly():
    r = verify_comass(FormFieldSpec(MetricParams(4)).scaled(2.0), n_points=500)
    assert r.max_violation == pytest.approx(1.0, abs=1e-6)
    assert not r.passed


def test_comass_ascent_matches_eigenvalue_oracle():
    # in 3D the comass of u^T M v over orthonormal pairs is the largest
    # singular value of the antisymmetric matrix M
    rng = np.random.default_rng(11)
    n = 64
    A = rng.standard_normal((n, 3, 3))
    W = A - np.swapaxes(A, 1, 2)
    B = rng.standard_normal((n, 3, 3))
    g = B @ np.swapaxes(B, 1, 2) + 0.5 * np.eye(3)
    got = comass_by_ascent(W, g, rng)
    L = np.linalg.cholesky(g)
    Li = np.linalg.inv(L)
    M = Li @ W @ np.swapaxes(Li, 1, 2)
    want = np.linalg.svd(M, compute_uv=False)[:, 0]
    assert np.allclose(got, want, rtol=1e-9)


def test_psi_closed_away_from_band():
    r = verify_closed(FormFieldSpec(MetricParams(2)), fd_step=1e-3)
    assert r.max_residual < 1e-5


def test_constant_form_closed():
    r = verify_closed(constant_form(MetricParams(2), [0.3, -1.2, 0.7]), fd_step=1e-3)
    assert r.max_residual < 1e-12


def test_non_closed_control_residual_is_slope_of_hat():
    # w = xh dy^dz has d w = xh' dx^dy^dz with |xh'| = 1 outside the band
    p = MetricParams(2)

    def ev(pts):
        out = np.zeros_like(pts)
        out[:, 2] = hat_values(pts[:, 0], p)
        return out

    r = verify_closed(FormFieldSpec(p, ev), fd_step=1e-3)
    assert r.max_residual == pytest.approx(1.0, abs=1e-6)


def test_closedness_order_is_two():
    r1, r2, order = closedness_order(FormFieldSpec(MetricParams(2)))
    assert r2 < r1
    assert order >= 1.9


@pytest.mark.parametrize("j", [1, 2, 3])
def test_calibrated_area_matches_closed_form(j):
    p = MetricParams(j, 0.0)
    got = pair_form_surface(FormFieldSpec(p), z_const_patch(p))
    assert got == pytest.approx(calibrated_area_closed_form(j), rel=1e-4)


def test_calibrated_area_j1_fixture():
    p = MetricParams(1, 0.0)
    assert pair_form_surface(FormFieldSpec(p), z_const_patch(p)) == pytest.approx(2.29559, abs=1e-4)


def test_closed_form_against_independent_quadrature():
    # integral of sqrt(1 + min(x, 2j - x)^2) over [0, 2j] with scipy's adaptive rule
    from scipy.integrate import quad

    for j in (1.0, 2.5, 7.0):
        val, _ = quad(lambda x: math.sqrt(1 + min(x, 2 * j - x) ** 2), 0, 2 * j, points=[j], epsabs=1e-12)
        assert calibrated_area_closed_form(j) == pytest.approx(val, rel=1e-10)
        assert calibrated_area_quadrature(MetricParams(j, 0.0)) == pytest.approx(val, rel=1e-10)


def test_y_const_pairing_is_dy_flux_of_psi():
    # psi restricted to a y = const surface is wxz dx^dz with wxz = -xh / sqrt(1 + xh^2);
    # the pairing is therefore -2 (sqrt(1 + j^2) - 1) for the sharp hat
    j = 2.0
    p = MetricParams(j, 0.0)
    got = pair_form_surface(FormFieldSpec(p), y_const_patch(p))
    assert got == pytest.approx(-2 * (math.sqrt(1 + j * j) - 1), rel=1e-5)


def test_y_const_pairing_of_star_dy_vanishes():
    # the form with no dx^dz component pairs to zero with y = const surfaces
    p = MetricParams(2)
    f = constant_form(p, [1.0, 0.0, 0.5])
    assert abs(pair_form_surface(f, y_const_patch(p))) < 1e-8


def test_orientation_reversal_negates():
    p = MetricParams(3)
    spec = FormFieldSpec(p)
    patch = tilted_patch(p, 0.3)
    assert pair_form_surface(spec, patch.reversed()) == pytest.approx(-pair_form_surface(spec, patch), rel=1e-14)


def test_z_const_patch_is_calibrated():
    p = MetricParams(2)
    spec = FormFieldSpec(p)
    for z in (0.0, 0.4):
        assert abs(calibration_defect(spec, z_const_patch(p, z))) < 1e-4


def test_tilted_patch_has_positive_defect():
    p = MetricParams(2)
    assert calibration_defect(FormFieldSpec(p), tilted_patch(p, 0.3)) > 1e-3


@settings(max_examples=25, deadline=None)
@given(
    j=st.floats(min_value=1.0, max_value=6.0),
    a=st.floats(min_value=-1.0, max_value=1.0),
    b=st.floats(min_value=-1.0, max_value=1.0),
    c=st.floats(min_value=-0.5, max_value=0.5),
)
def test_defect_nonnegative_on_random_patches(j, a, b, c):
    p = MetricParams(j)

    def param(u, v):
        x = u * p.length
        y = v
        z = a * v + b * np.sin(2 * np.pi * v) * u + c * u
        return np.stack([x, y, z], axis=-1)

    patch = SurfacePatch(param, nu=32, nv=16, label="random")
    assert calibration_defect(FormFieldSpec(p), patch) >= -1e-6 * max(1.0, patch_area(FormFieldSpec(p), patch))


def test_patch_resolution_guard():
    with pytest.raises(ValueError):
        SurfacePatch(lambda u, v: np.stack([u, v, 0 * u], -1), nu=4, nv=4)
    with pytest.raises(ValueError):
        SurfacePatch(lambda u, v: np.stack([u, v, 0 * u], -1), orientation=0)


def test_degenerate_patch_warns():
    p = MetricParams(2)
    patch = SurfacePatch(lambda u, v: np.stack([u * p.length, 0 * v, 0 * v], -1), label="line")
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        assert pair_form_surface(FormFieldSpec(p), patch) == 0.0
    assert w


def test_calibration_report_passes():
    r = calibration_report(MetricParams(2), n_points=2000)
    assert r.passed
    assert r.comass_max == pytest.approx(1.0, abs=1e-6)
