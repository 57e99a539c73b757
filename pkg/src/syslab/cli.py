"""Command-line interface: ``syslab <subcommand> ...``.

Exit codes: 0 success, 2 validation failure, 3 tolerance violation,
4 resource budget exceeded.  Global flags (--seed, --format, --out, --tol,
--config, --max-cells) may appear before or after the subcommand; values
from a --config key=value file are overridden by explicit flags.
"""
from __future__ import annotations

import argparse
import sys
import warnings
from pathlib import Path

from . import __version__
from ._jsonfmt import dumps
from .errors import DomainError, ResourceBudgetError, ToleranceViolation, ValidationError

EXIT_OK, EXIT_VALIDATION, EXIT_TOLERANCE, EXIT_BUDGET = 0, 2, 3, 4

DEFAULTS = {
    "j": None,
    "seed": 0,
    "format": None,
    "out": None,
    "tol": None,
    "config": None,
    "max_cells": None,
    "delta": 0.1,
    "x": None,
    "y": 0.0,
    "z": 0.0,
    "order": 8,
    "fd_step": 1e-3,
    "points": 10_000,
    "res": None,
    "max_winding": 2,
    "max_multiple": 16,
    "cls": "1,0",
    "dual": "dz",
    "witness": None,
    "j_values": "2,4,8,16",
    "workers": 1,
    "plot": None,
    "infile": None,
}


def _triple(text: str) -> tuple[int, int, int]:
    parts = text.split(",")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected NX,NY,NZ")
    return tuple(int(p) for p in parts)


def _pair(text: str) -> tuple[int, int]:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError("expected A,B")
    return int(parts[0]), int(parts[1])


def _add_globals(p: argparse.ArgumentParser) -> None:
    S = argparse.SUPPRESS
    p.add_argument("--seed", type=int, default=S, help="64-bit seed for all sampling")
    p.add_argument("--format", choices=("csv", "json"), default=S)
    p.add_argument("--out", type=Path, default=S, help="write output here instead of stdout")
    p.add_argument("--tol", type=float, default=S)
    p.add_argument("--config", type=Path, default=S, help="key=value file; flags override it")
    p.add_argument("--max-cells", dest="max_cells", type=int, default=S)


def build_parser() -> argparse.ArgumentParser:
    S = argparse.SUPPRESS
    parser = argparse.ArgumentParser(prog="syslab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"syslab {__version__}")
    _add_globals(parser)
    sub = parser.add_subparsers(dest="command", required=True)

    def cmd(parent, name, help_):
        p = parent.add_parser(name, help=help_)
        _add_globals(p)
        return p

    metric = sub.add_parser("metric", help="evaluate g_j").add_subparsers(dest="action", required=True)
    p = cmd(metric, "eval", "metric tensor and psi at a point")
    p.add_argument("--j", type=float, default=S)
    p.add_argument("--x", type=float, default=S)
    p.add_argument("--y", type=float, default=S)
    p.add_argument("--z", type=float, default=S)
    p.add_argument("--delta", type=float, default=S)
    p = cmd(metric, "volume", "total volume")
    p.add_argument("--j", type=float, default=S)
    p.add_argument("--order", type=int, default=S)
    p.add_argument("--delta", type=float, default=S)

    verify = sub.add_parser("verify", help="numerical certificates").add_subparsers(dest="action", required=True)
    p = cmd(verify, "calibration", "comass, closedness and defects of psi_j")
    p.add_argument("--j", type=float, default=S)
    p.add_argument("--fd-step", dest="fd_step", type=float, default=S)
    p.add_argument("--points", type=int, default=S)
    p.add_argument("--delta", type=float, default=S)

    systole = sub.add_parser("systole", help="1-systoles").add_subparsers(dest="action", required=True)
    p = cmd(systole, "sys1", "shortest nontrivial loop")
    p.add_argument("--j", type=float, default=S)
    p.add_argument("--res", type=_triple, default=S)
    p.add_argument("--max-winding", dest="max_winding", type=int, default=S)
    p.add_argument("--witness", type=Path, default=S)
    p.add_argument("--delta", type=float, default=S)
    p = cmd(systole, "stable", "stable norm bracket of a class")
    p.add_argument("--class", dest="cls", default=S, help="A,B (z-winding, y-winding)")
    p.add_argument("--j", type=float, default=S)
    p.add_argument("--max-multiple", dest="max_multiple", type=int, default=S)
    p.add_argument("--res", type=_triple, default=S)
    p.add_argument("--delta", type=float, default=S)

    cut = sub.add_parser("cut", help="relative 2-cycles").add_subparsers(dest="action", required=True)
    p = cmd(cut, "sys2rel", "minimal relative 2-cycle by min cut")
    p.add_argument("--dual", choices=("dy", "dz"), default=S)
    p.add_argument("--j", type=float, default=S)
    p.add_argument("--res", type=_triple, default=S)
    p.add_argument("--witness", type=Path, default=S)
    p.add_argument("--delta", type=float, default=S)

    pants = sub.add_parser("pants", help="surface-to-sphere plans").add_subparsers(dest="action", required=True)
    p = cmd(pants, "build", "build a map plan from a decorated surface file")
    p.add_argument("--in", dest="infile", type=Path, required=True)

    p = cmd(sub, "sweep", "sweep over j and emit a report")
    p.add_argument("--j-values", dest="j_values", default=S)
    p.add_argument("--workers", type=int, default=S)
    p.add_argument("--plot", type=Path, default=S, help="also write a plotting script here")
    p.add_argument("--delta", type=float, default=S)

    p = cmd(sub, "report", "re-emit a saved report (recomputing fits)")
    p.add_argument("--in", dest="infile", type=Path, required=True)
    p.add_argument("--plot", type=Path, default=S)
    return parser


def read_config(path: Path, parser: argparse.ArgumentParser) -> dict:
    types = {}
    for action in _all_actions(parser):
        if action.dest and action.type is not None:
            types[action.dest] = action.type
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValidationError(f"{path}:{lineno}: expected key=value")
        key, val = (t.strip() for t in line.split("=", 1))
        key = key.replace("-", "_")
        if key == "class":
            key = "cls"
        if key not in DEFAULTS:
            raise ValidationError(f"{path}:{lineno}: unknown key {key!r}")
        conv = types.get(key)
        try:
            out[key] = conv(val) if conv else val
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise ValidationError(f"{path}:{lineno}: bad value for {key}: {exc}") from None
    return out


def _all_actions(parser):
    for a in parser._actions:
        yield a
        if isinstance(a, argparse._SubParsersAction):
            for sp in a.choices.values():
                yield from _all_actions(sp)


def resolve_args(argv, parser=None) -> argparse.Namespace:
    parser = parser or build_parser()
    ns = parser.parse_args(argv)
    explicit = vars(ns)
    merged = dict(DEFAULTS)
    if explicit.get("config") is not None:
        merged.update(read_config(explicit["config"], parser))
    merged.update(explicit)
    return argparse.Namespace(**merged)


# ---------------------------------------------------------------------------

def _emit(args, payload: bytes) -> None:
    if args.out is not None:
        Path(args.out).write_bytes(payload)
    else:
        sys.stdout.buffer.write(payload)
        sys.stdout.flush()


def _emit_json(args, obj) -> None:
    _emit(args, (dumps(obj) + "\n").encode())


def _params(args):
    from .metric_family import MetricParams

    if args.j is None:
        raise ValidationError("--j is required (flag or config entry)")
    return MetricParams(args.j, args.delta)


def _mesh(args):
    from .discrete.mesh import build_mesh, default_resolution

    params = _params(args)
    res = args.res or default_resolution(params.j)[0]
    if args.max_cells is not None and res[0] * res[1] * res[2] > args.max_cells:
        raise ResourceBudgetError(f"resolution {res} has more than max_cells={args.max_cells} cells")
    return build_mesh(params, res)


def cmd_metric(args) -> int:
    from .metric_family import PointTI, hat, metric_at, psi_at, total_volume

    params = _params(args)
    if args.action == "volume":
        _emit_json(args, {"j": params.j, "volume": total_volume(params, args.order)})
        return EXIT_OK
    x = params.j if args.x is None else args.x
    p = PointTI(x, args.y, args.z)
    g = metric_at(p, params)
    w = psi_at(p, params)
    _emit_json(args, {
        "j": params.j,
        "point": {"x": p.x, "y": p.y, "z": p.z},
        "hat": hat(p.x, params),
        "metric": {k: getattr(g, k) for k in ("gxx", "gxy", "gxz", "gyy", "gyz", "gzz")},
        "det": g.det(),
        "psi": {"wxy": w.wxy, "wxz": w.wxz, "wyz": w.wyz},
    })
    return EXIT_OK


def cmd_verify(args) -> int:
    from .calibration import calibration_report

    tol = 1e-6 if args.tol is None else args.tol
    rep = calibration_report(_params(args), n_points=args.points, fd_step=args.fd_step, seed=args.seed, tol=tol)
    _emit_json(args, {
        "comass_max": rep.comass_max,
        "d_residual": rep.d_residual,
        "defect_by_patch": rep.defect_by_patch,
        "passed": rep.passed,
    })
    if not rep.passed:
        raise ToleranceViolation("calibration certificate failed")
    return EXIT_OK


def _systole_payload(res, mesh, value=None, **extra):
    d = {
        "value": res.value if value is None else value,
        "class": [res.winding.a, res.winding.b],
        "certificate": res.lower_bound_certificate,
        "resolution": list(mesh.dims),
    }
    d.update(extra)
    return d


def cmd_systole(args) -> int:
    from .discrete.mesh import WindingClass
    from .discrete.paths import shortest_nontrivial_cycle
    from .discrete.stable import stable_norm_bounds

    mesh = _mesh(args)
    if args.action == "sys1":
        res = shortest_nontrivial_cycle(mesh, args.max_winding)
        if args.witness is not None:
            res.witness.write(args.witness, mesh)
        _emit_json(args, _systole_payload(res, mesh))
        return EXIT_OK
    a, b = _pair(args.cls)
    bounds = stable_norm_bounds(mesh, WindingClass(a, b), args.max_multiple)
    _emit_json(args, {
        "value": bounds.ub,
        "class": [a, b],
        "certificate": bounds.lb,
        "lb": bounds.lb,
        "ub": bounds.ub,
        "best_multiple": bounds.best_multiple,
        "split": [[c.a, c.b] for c in bounds.best_split],
        "resolution": list(mesh.dims),
    })
    if args.tol is not None and bounds.lb > bounds.ub + args.tol:
        raise ToleranceViolation("stable norm bracket is inverted")
    return EXIT_OK


def cmd_cut(args) -> int:
    from .discrete.cuts import min_relative_2cycle

    mesh = _mesh(args)
    res = min_relative_2cycle(mesh, args.dual)
    if args.witness is not None:
        res.witness.write(args.witness, mesh)
    _emit_json(args, _systole_payload(res, mesh))
    tol = 1e-6 if args.tol is None else args.tol
    if res.value < res.lower_bound_certificate - tol:
        raise ToleranceViolation("min cut below its calibration certificate")
    return EXIT_OK


def cmd_pants(args) -> int:
    from .pants_map import build_map_plan, parse_surface, validate_surface

    try:
        text = Path(args.infile).read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read {args.infile}: {exc}") from None
    surface = parse_surface(text)
    summary = validate_surface(surface)
    plan = build_map_plan(surface)
    d = plan.as_dict()
    d["genus"] = summary.genus
    d["annuli"] = len(surface.annuli)
    _emit_json(args, d)
    return EXIT_OK


def cmd_sweep(args) -> int:
    from .harness import ResolutionPolicy, default_fits, emit_report, plot_script, sweep

    js = [float(t) for t in str(args.j_values).split(",") if t.strip()]
    policy = ResolutionPolicy(args.max_cells)
    records = sweep(js, policy, seed=args.seed, workers=args.workers, smoothing_delta=args.delta)
    fits = default_fits(records)
    _emit(args, emit_report(records, fits, args.format or "csv", seed=args.seed))
    if args.plot is not None:
        Path(args.plot).write_text(plot_script(records, fits))
    return EXIT_OK


def cmd_report(args) -> int:
    from .harness import default_fits, emit_report, parse_report, plot_script

    data = Path(args.infile).read_bytes()
    src = "json" if data.lstrip().startswith(b"{") else "csv"
    records, _, meta = parse_report(data, src)
    fits = default_fits(records)
    seed = meta.get("seed", args.seed)
    _emit(args, emit_report(records, fits, args.format or "csv", seed=seed))
    if args.plot is not None:
        Path(args.plot).write_text(plot_script(records, fits))
    return EXIT_OK


COMMANDS = {
    "metric": cmd_metric,
    "verify": cmd_verify,
    "systole": cmd_systole,
    "cut": cmd_cut,
    "pants": cmd_pants,
    "sweep": cmd_sweep,
    "report": cmd_report,
}


def main(argv=None) -> int:
    try:
        args = resolve_args(argv)
    except SystemExit as exc:
        return EXIT_VALIDATION if exc.code not in (0, None) else EXIT_OK
    except ValidationError as exc:
        print(f"syslab: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("default")
            return COMMANDS[args.command](args)
    except ToleranceViolation as exc:
        print(f"syslab: tolerance violation: {exc}", file=sys.stderr)
        return EXIT_TOLERANCE
    except ResourceBudgetError as exc:
        print(f"syslab: resource budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except (ValidationError, DomainError) as exc:
        print(f"syslab: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as exc:
        from .harness import SweepError

        if isinstance(exc, SweepError):
            print(f"syslab: {exc}", file=sys.stderr)
            if isinstance(exc.cause, ResourceBudgetError):
                return EXIT_BUDGET
            if isinstance(exc.cause, (ValidationError, DomainError)):
                return EXIT_VALIDATION
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
