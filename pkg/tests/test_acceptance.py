"""Acceptance criteria, each checked at its stated tolerance.

Every test prints one ``[PASS]`` / ``[FAIL]`` line; the lines are also
collected and repeated in the pytest terminal summary.
"""
from __future__ import annotations

import math
import subprocess
import sys
import time

import numpy as np

from syslab.calibration import (
    FormFieldSpec,
    calibrated_area_closed_form,
    closedness_order,
    pair_form_surface,
    verify_closed,
    verify_comass,
    z_const_patch,
)
from syslab.discrete.cuts import min_relative_2cycle
from syslab.discrete.mesh import (
    WindingClass,
    build_mesh,
    default_resolution,
    flat_control_mesh,
    min_resolution,
)
from syslab.discrete.paths import ball_mass, build_stencil, loop_start_vertex, shortest_nontrivial_cycle
from syslab.discrete.stable import stable_norm_bounds
from syslab.errors import ValidationError
from syslab.harness import fit_exponent
from syslab.metric_family import MetricParams, curvature_report, total_volume
from syslab.pants_map import (
    DecoratedSurface,
    assign_markings,
    build_map_plan,
    iter_slots,
    random_surface,
    torus_fixture,
    validate_surface,
)


def verdict(log, number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
    print(line)
    log.append(line)
    assert ok, line


def loglog_slope(xs, ys) -> float:
    return fit_exponent([{"x": x, "y": y} for x, y in zip(xs, ys)], "x", "y").slope


def test_criterion_01_volume_linearity(acceptance_log):
    js = (1, 2, 4, 8, 16, 32)
    t0 = time.perf_counter()
    vols = [total_volume(MetricParams(j)) for j in js]
    elapsed = time.perf_counter() - t0
    err = max(abs(v - 2 * j) / (2 * j) for v, j in zip(vols, js))
    ok = err <= 1e-6 and elapsed < 1.0
    verdict(acceptance_log, 1, "volume linearity", ok, f"max rel err {err:.2e} (<=1e-6), {elapsed:.3f} s (<1 s)")


def test_criterion_02_calibration_certificate(acceptance_log):
    js = (1, 2, 4, 8, 16)
    worst_comass, worst_res, worst_order = 0.0, 0.0, np.inf
    for j in js:
        spec = FormFieldSpec(MetricParams(j))
        c = verify_comass(spec, n_points=10_000, tol=1e-6)
        worst_comass = max(worst_comass, abs(c.max_value - 1.0))
        worst_res = max(worst_res, verify_closed(spec, fd_step=1e-3).max_residual)
        worst_order = min(worst_order, closedness_order(spec)[2])
    ok = worst_comass <= 1e-6 and worst_res < 1e-5 and worst_order >= 1.9
    verdict(
        acceptance_log, 2, "calibration certificate", ok,
        f"|comass-1| {worst_comass:.2e} (<=1e-6), d-residual {worst_res:.2e} (<1e-5), order {worst_order:.3f} (>=1.9)",
    )


def test_criterion_03_calibrated_quadratic_area(acceptance_log):
    # the closed form is the pairing for the unsmoothed hat, so the metric is taken sharp here
    def area(j):
        p = MetricParams(j, 0.0)
        return pair_form_surface(FormFieldSpec(p), z_const_patch(p))

    rel = max(abs(area(j) - calibrated_area_closed_form(j)) / calibrated_area_closed_form(j) for j in (1, 2, 4, 8))
    js = (2, 4, 8, 16, 32)
    slope = loglog_slope(js, [area(j) for j in js])
    ok = rel <= 1e-4 and abs(slope - 2.0) <= 0.05
    verdict(
        acceptance_log, 3, "calibrated quadratic area", ok,
        f"max rel err {rel:.2e} (<=1e-4, j<=8), log-log slope over j=2..32 {slope:.4f} (2.0 +- 0.05)",
    )


def test_criterion_04_systole_floor(acceptance_log):
    vals, changes = {}, {}
    for j in (2, 4, 8):
        res, _ = default_resolution(j)
        p = MetricParams(j)
        v1 = shortest_nontrivial_cycle(build_mesh(p, res)).value
        v2 = shortest_nontrivial_cycle(build_mesh(p, tuple(2 * r for r in res))).value
        vals[j], changes[j] = v1, abs(v2 - v1) / v1
    ok = all(0.95 <= v <= 1.05 for v in vals.values()) and all(c < 0.03 for c in changes.values())
    detail = ", ".join(f"j={j}: sys1 {vals[j]:.4f}, R->2R change {changes[j]:.1%}" for j in vals)
    verdict(acceptance_log, 4, "systole floor", ok, detail + " (sys1 in [0.95,1.05], change <3%)")


def test_criterion_05_stable_norm_collapse(acceptance_log):
    parts, ok = [], True
    for j in (4, 8, 16):
        t0 = time.perf_counter()
        res, _ = default_resolution(j)
        mesh = build_mesh(MetricParams(j), res)
        st = build_stencil(mesh)
        sys1 = shortest_nontrivial_cycle(mesh, stencil=st).value
        b = stable_norm_bounds(mesh, WindingClass(1, 0), stencil=st)
        elapsed = time.perf_counter() - t0
        gap = sys1 / b.ub
        ok &= b.ub <= 2.2 / j and b.lb >= 1 / math.sqrt(1 + j * j) and gap >= 0.45 * j and elapsed < 60
        parts.append(f"j={j}: lb {b.lb:.4f} ub {b.ub:.4f} (<= {2.2 / j:.4f}) gap {gap:.2f} (>= {0.45 * j:.2f}) {elapsed:.1f} s")
    verdict(acceptance_log, 5, "stable-norm collapse", ok, "; ".join(parts))


def test_criterion_06_min_cut_vs_calibration(acceptance_log):
    parts, ok = [], True
    for j in (2, 4, 8, 16):
        base, _ = default_resolution(j)
        # the default grid plus the coarsest admissible one
        for res in (base, min_resolution(MetricParams(j))):
            mesh = build_mesh(MetricParams(j), res)
            dz = min_relative_2cycle(mesh, "dz")
            ok &= dz.value >= dz.lower_bound_certificate - 1e-6
            if res == base:
                dy = min_relative_2cycle(mesh, "dy")
                ok &= abs(dy.value - 2 * j) <= 0.05 * 2 * j
                line = f"j={j}: dz {dz.value:.4f} >= cert {dz.lower_bound_certificate:.4f}, dy {dy.value:.4f}"
                if j <= 8:
                    ref = calibrated_area_closed_form(j)
                    ok &= abs(dz.value - ref) <= 0.10 * ref
                    line += f", closed form {ref:.4f}"
                parts.append(line)
    verdict(acceptance_log, 6, "min-cut vs calibration", ok, "; ".join(parts))


def test_criterion_07_systolic_ratio_decay(acceptance_log, default_sweep):
    js = [r.j for r in default_sweep]
    ratios = [r.ratio_eq2 for r in default_sweep]
    bounded = all(q <= 3 / j for q, j in zip(ratios, js))
    decreasing = all(a > b for a, b in zip(ratios, ratios[1:]))
    slope = fit_exponent(default_sweep, "j", "ratio_eq2").slope
    ok = bounded and decreasing and abs(slope + 1.0) <= 0.15
    verdict(
        acceptance_log, 7, "systolic-ratio decay", ok,
        f"ratios {', '.join(f'{q:.4f}' for q in ratios)} (<=3/j: {bounded}, decreasing: {decreasing}), "
        f"slope {slope:.4f} (-1.0 +- 0.15)",
    )


def test_criterion_08_bounded_geometry(acceptance_log):
    k2 = curvature_report(MetricParams(2)).max_abs_sectional
    k16 = curvature_report(MetricParams(16)).max_abs_sectional
    var = abs(k2 - k16) / max(k2, k16)
    ok = max(k2, k16) <= 0.76 and var < 0.02
    verdict(acceptance_log, 8, "bounded geometry", ok, f"max|K| j=2 {k2:.5f}, j=16 {k16:.5f} (<=0.76), variation {var:.2%} (<2%)")


def test_criterion_09_monotonicity(acceptance_log):
    cases = {"flat": flat_control_mesh((16, 16, 16))}
    for j in (2, 8):
        cases[f"g_{j}"] = build_mesh(MetricParams(j), default_resolution(j)[0])
    masses = {}
    for name, mesh in cases.items():
        r = shortest_nontrivial_cycle(mesh)
        masses[name] = ball_mass(r.witness, loop_start_vertex(r, mesh), 0.25, mesh)
    ok = all(m >= 0.45 for m in masses.values())
    verdict(acceptance_log, 9, "monotonicity", ok, ", ".join(f"{k}: {v:.4f}" for k, v in masses.items()) + " (>=0.45)")


def test_criterion_10_pants_suite(acceptance_log):
    rng = np.random.default_rng(20240607)
    surfaces = [torus_fixture()] + [random_surface(int(rng.integers(1, 6)), rng) for _ in range(100)]
    failures = 0
    for s in surfaces:
        try:
            validate_surface(s)
            marks = assign_markings(s)
            plan = build_map_plan(s)
            consistent = set(marks) == set(iter_slots(s)) and all(
                plan.markings[a.side_s] == "SP" and plan.markings[a.side_n] == "NP" for a in s.annuli
            )
            bands = all(plan.bands[a.loop_id] == 1 for a in s.annuli)
            if not (consistent and bands and plan.degree >= len(s.annuli)):
                failures += 1
        except Exception:
            failures += 1
    try:
        validate_surface(DecoratedSurface((), ()))
        empty_rejected = False
    except ValidationError:
        empty_rejected = True
    ok = failures == 0 and empty_rejected
    verdict(
        acceptance_log, 10, "pants suite", ok,
        f"{len(surfaces) - failures}/{len(surfaces)} surfaces pass, empty family rejected: {empty_rejected}",
    )


def test_criterion_11_determinism(acceptance_log, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"run{k}.csv"
        cmd = [sys.executable, "-m", "syslab.cli", "sweep", "--seed", "7", "--out", str(path)]
        p = subprocess.run(cmd, capture_output=True, text=True, check=False)
        assert p.returncode == 0, p.stderr
        outs.append(path.read_bytes())
    ok = outs[0] == outs[1] and len(outs[0]) > 0
    verdict(acceptance_log, 11, "determinism", ok, f"two sweep --seed 7 reports byte-identical: {outs[0] == outs[1]} ({len(outs[0])} bytes)")
