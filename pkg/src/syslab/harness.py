"""Sweeps over j, log-log exponent fits and report emission."""
from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import __version__
from ._jsonfmt import dumps, fmt_float
from .calibration import FormFieldSpec, pair_form_surface, z_const_patch
from .discrete.cuts import min_relative_2cycle
from .discrete.mesh import WindingClass, build_mesh, default_resolution
from .discrete.paths import build_stencil, shortest_nontrivial_cycle
from .discrete.stable import stable_norm_bounds
from .errors import ResourceBudgetError, SyslabError, ValidationError
from .metric_family import MetricParams, total_volume

CSV_COLUMNS = (
    "j", "nx", "ny", "nz", "vol", "sys1", "stsys1_lb", "stsys1_ub",
    "sys2rel_dz", "sys2rel_dy", "calib_area", "ratio_eq2", "gap_eq5",
)
REAL_FIELDS = tuple(c for c in CSV_COLUMNS if c not in ("nx", "ny", "nz"))
DEFAULT_J_VALUES = (2.0, 4.0, 8.0, 16.0)


@dataclass(frozen=True)
class SweepRecord:
    j: float
    resolution: tuple[int, int, int]
    vol: float
    sys1: float
    stsys1_lb: float
    stsys1_ub: float
    sys2rel_dz: float
    sys2rel_dy: float
    calib_area: float
    ratio_eq2: float
    gap_eq5: float

    def __post_init__(self):
        for name in REAL_FIELDS:
            v = getattr(self, name)
            if not (math.isfinite(v) and v > 0):
                raise ValidationError(f"record field {name}={v} must be finite and positive")

    def row(self) -> dict:
        nx, ny, nz = self.resolution
        d = {name: getattr(self, name) for name in REAL_FIELDS}
        d.update(nx=nx, ny=ny, nz=nz)
        return {c: d[c] for c in CSV_COLUMNS}

    @classmethod
    def from_row(cls, row: dict) -> "SweepRecord":
        vals = {name: float(row[name]) for name in REAL_FIELDS}
        res = (int(row["nx"]), int(row["ny"]), int(row["nz"]))
        return cls(resolution=res, **vals)


@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    points_used: int
    x_field: str = "j"
    y_field: str = ""


@dataclass(frozen=True)
class ResolutionPolicy:
    """(max(32, 8j), max(16, 4j), 16), optionally capped by a cell budget."""

    max_cells: int | None = None
    scale: int = 1

    def __call__(self, j: float) -> tuple[int, int, int]:
        res, ok = default_resolution(j, self.max_cells)
        if not ok:
            warnings.warn(
                f"j={j:g}: resolution capped to {res} by max_cells={self.max_cells}; accuracy targets may fail",
                RuntimeWarning,
                stacklevel=2,
            )
        if self.max_cells is not None and res[0] * res[1] * res[2] > self.max_cells:
            raise ResourceBudgetError(f"j={j:g}: even the coarsest admissible mesh {res} exceeds max_cells")
        return tuple(self.scale * r for r in res)


class SweepError(SyslabError):
    def __init__(self, j: float, cause: Exception):
        super().__init__(f"sweep failed at j={j:g}: {cause}")
        self.j = j
        self.cause = cause


def sweep_one(j: float, resolution: tuple[int, int, int], smoothing_delta: float = 0.1,
              max_multiple: int = 16, max_winding: int = 2) -> SweepRecord:
    params = MetricParams(j, smoothing_delta)
    vol = total_volume(params)
    mesh = build_mesh(params, resolution)
    stencil = build_stencil(mesh)
    sys1 = shortest_nontrivial_cycle(mesh, max_winding, stencil).value
    st = stable_norm_bounds(mesh, WindingClass(1, 0), max_multiple, stencil)
    dz = min_relative_2cycle(mesh, "dz").value
    dy = min_relative_2cycle(mesh, "dy").value
    calib = pair_form_surface(FormFieldSpec(params), z_const_patch(params))
    return SweepRecord(
        j=float(j), resolution=tuple(int(r) for r in resolution), vol=vol, sys1=sys1,
        stsys1_lb=st.lb, stsys1_ub=st.ub, sys2rel_dz=dz, sys2rel_dy=dy, calib_area=calib,
        ratio_eq2=vol / (sys1 * dz), gap_eq5=sys1 / st.ub,
    )


def _sweep_task(args):
    j, res, kw = args
    try:
        return sweep_one(j, res, **kw), None
    except Exception as exc:  # reported with its j by the caller
        return None, exc


def sweep(
    j_values,
    resolution_policy: ResolutionPolicy | None = None,
    seed: int = 0,
    workers: int = 1,
    **kwargs,
) -> list[SweepRecord]:
    """One record per j, in input order.

    Nothing here is random; ``seed`` is accepted so that every entry point
    takes the same reproducibility knob and is recorded in reports.
    """
    js = [float(j) for j in j_values]
    if not js:
        raise ValidationError("j_values is empty")
    if any(j < 1 for j in js):
        raise ValidationError("every j must be >= 1")
    if any(b <= a for a, b in zip(js, js[1:])):
        raise ValidationError("j_values must be strictly increasing")
    policy = resolution_policy or ResolutionPolicy()
    tasks = [(j, policy(j), kwargs) for j in js]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_sweep_task, tasks))
    else:
        results = [_sweep_task(t) for t in tasks]
    out = []
    for (j, _, _), (rec, exc) in zip(tasks, results):
        if exc is not None:
            raise SweepError(j, exc) from exc
        out.append(rec)
    return out


def fit_exponent(records, x_field: str = "j", y_field: str = "vol") -> FitResult:
    x = np.array([_field(r, x_field) for r in records], dtype=float)
    y = np.array([_field(r, y_field) for r in records], dtype=float)
    if len(x) < 3:
        raise ValidationError("fit_exponent needs at least 3 records")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValidationError(f"non-positive values in {x_field} or {y_field}")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 1.0
    return FitResult(float(slope), float(intercept), min(max(r2, 0.0), 1.0), len(x), x_field, y_field)


def _field(r, name):
    if isinstance(r, dict):
        return r[name]
    return getattr(r, name)


DEFAULT_FITS = (("j", "vol"), ("j", "sys2rel_dz"), ("j", "calib_area"), ("j", "ratio_eq2"), ("j", "stsys1_ub"))


def default_fits(records) -> list[FitResult]:
    if len(records) < 3:
        return []
    return [fit_exponent(records, x, y) for x, y in DEFAULT_FITS]


# ---------------------------------------------------------------------------
# reports

def emit_report(records, fits=(), format: str = "csv", seed: int = 0, version: str = __version__) -> bytes:
    if not records:
        raise ValidationError("no records to report")
    if format == "csv":
        lines = [f"# seed={seed} version={version}", ",".join(CSV_COLUMNS)]
        for r in records:
            row = r.row()
            lines.append(",".join(str(row[c]) if c in ("nx", "ny", "nz") else fmt_float(row[c]) for c in CSV_COLUMNS))
        for f in fits:
            lines.append(
                f"# fit {f.y_field}~{f.x_field} slope={fmt_float(f.slope)} intercept={fmt_float(f.intercept)}"
                f" r_squared={fmt_float(f.r_squared)} points_used={f.points_used}"
            )
        return ("\n".join(lines) + "\n").encode()
    if format == "json":
        doc = {
            "meta": {"seed": int(seed), "version": version, "columns": list(CSV_COLUMNS)},
            "records": [r.row() for r in records],
            "fits": [asdict(f) for f in fits],
        }
        return (dumps(doc) + "\n").encode()
    raise ValidationError(f"unknown report format {format!r}")


def parse_report(data: bytes, format: str = "csv"):
    """(records, fits, meta) from ``emit_report`` output."""
    text = data.decode() if isinstance(data, bytes) else data
    if format == "json":
        doc = json.loads(text)
        recs = [SweepRecord.from_row(r) for r in doc["records"]]
        fits = [FitResult(**f) for f in doc.get("fits", [])]
        return recs, fits, doc.get("meta", {})
    if format != "csv":
        raise ValidationError(f"unknown report format {format!r}")
    meta, fits, body = {}, [], []
    for line in text.splitlines():
        if line.startswith("# fit "):
            head, *kv = line[6:].split()
            y, x = head.split("~")
            d = dict(t.split("=", 1) for t in kv)
            fits.append(FitResult(float(d["slope"]), float(d["intercept"]), float(d["r_squared"]),
                                  int(d["points_used"]), x, y))
        elif line.startswith("#"):
            meta.update(dict(t.split("=", 1) for t in line[1:].split() if "=" in t))
        elif line.strip():
            body.append(line)
    reader = csv.DictReader(io.StringIO("\n".join(body)))
    if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
        raise ValidationError(f"unexpected CSV columns {reader.fieldnames}")
    recs = [SweepRecord.from_row(row) for row in reader]
    if "seed" in meta:
        meta["seed"] = int(meta["seed"])
    return recs, fits, meta


def plot_script(records, fits=(), fields=("vol", "sys1", "stsys1_ub", "sys2rel_dz", "calib_area", "ratio_eq2")) -> str:
    """A standalone matplotlib script drawing log-log curves of the report data."""
    data = {"j": [r.j for r in records]}
    for f in fields:
        data[f] = [getattr(r, f) for r in records]
    lines = [
        "import matplotlib.pyplot as plt",
        "",
        f"data = {dumps(data, indent=0).replace(chr(10), ' ')}",
        "fig, ax = plt.subplots(figsize=(6, 4.5))",
        "for name, ys in data.items():",
        "    if name != 'j':",
        "        ax.loglog(data['j'], ys, marker='o', label=name)",
    ]
    for f in fits:
        lines.append(f"# fitted exponent {f.y_field} ~ {f.x_field}: {fmt_float(f.slope)}")
    lines += [
        "ax.set_xlabel('j')",
        "ax.legend()",
        "fig.tight_layout()",
        "fig.savefig('sweep_loglog.png', dpi=150)",
        "",
    ]
    return "\n".join(lines)


def hebda_spot_check(record: SweepRecord, fiber_area: float = 1.0) -> dict:
    """stable norm of the z-class times the smallest torus-fiber area against 8 * volume."""
    lhs = record.stsys1_ub * fiber_area
    rhs = 8.0 * record.vol
    return {"lhs": lhs, "rhs": rhs, "holds": bool(lhs <= rhs)}


def check_record_invariants(r: SweepRecord) -> dict:
    """Named booleans for the per-record sweep invariants."""
    return {
        "ratio_definition": abs(r.ratio_eq2 * r.sys1 * r.sys2rel_dz - r.vol) <= 1e-9 * r.vol,
        "ratio_le_3_over_j": r.ratio_eq2 <= 3.0 / r.j,
        "sys1_floor": r.sys1 >= 0.95,
        "vol_linear": 1.9 <= r.vol / r.j <= 2.1,
        "gap_growth": r.gap_eq5 >= 0.45 * r.j if r.j >= 4 else True,
    }
