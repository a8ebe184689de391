"""Command-line entry point: ``schrodinger-ot {sweep,verify,shape-distance}``.

Exit codes: 0 success, 1 verification failure or optimizer non-convergence,
2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__, analytic
from .core import PhysParams, SchrodingerOTError
from .ot_solver import NoConvergence
from .quadrature import RNG_ALGORITHM
from .shape import IsometrySearchConfig, shape_distance
from .verify import DEFAULT_TOLERANCES, SUITES, SuiteContext, run_suite

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2

CONFIG_KEYS = {"params", "seed", "tolerances", "output_format", "output_path", "suite", "t_grid"}
SWEEP_COLUMNS = ("t", "W_0_t", "metric_derivative", "fisher_information", "variance", "phase_coefficient")


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    params: PhysParams = field(default_factory=PhysParams)
    seed: int = 0
    tolerances: dict = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    output_format: str = "json"
    output_path: str | None = None
    suite: str = "all"
    t_grid: tuple = (0.0, 1.0, 2.0)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "seed": self.seed,
            "tolerances": dict(sorted(self.tolerances.items())),
            "output_format": self.output_format,
            "output_path": self.output_path,
            "suite": self.suite,
            "t_grid": list(self.t_grid),
        }


def merge_tolerances(overrides: dict) -> dict:
    unknown = sorted(set(overrides) - set(DEFAULT_TOLERANCES))
    if unknown:
        raise ConfigError(f"unknown tolerance keys: {', '.join(unknown)}")
    merged = dict(DEFAULT_TOLERANCES)
    for key, value in overrides.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not value >= 0:
            raise ConfigError(f"tolerance {key} must be a nonnegative number")
        merged[key] = float(value)
    return merged


def parse_t_grid(values) -> tuple:
    if isinstance(values, str):
        try:
            values = [float(v) for v in values.split(",") if v.strip()]
        except ValueError as exc:
            raise ConfigError(f"bad --t-grid: {exc}") from None
    grid = tuple(float(v) for v in values)
    if not grid:
        raise ConfigError("t_grid is empty")
    if any(not np.isfinite(t) or t < 0 for t in grid):
        raise ConfigError("t_grid entries must be finite and nonnegative")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ConfigError("t_grid must be strictly increasing")
    return grid


def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    unknown = sorted(set(doc) - CONFIG_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    return doc


def build_config(args: argparse.Namespace) -> RunConfig:
    doc = load_config(args.config)
    params = dict(doc.get("params", {}))
    if set(params) - {"hbar", "mass", "width"}:
        raise ConfigError(f"unknown params keys: {sorted(set(params) - {'hbar', 'mass', 'width'})}")
    for name in ("hbar", "mass", "width"):
        if getattr(args, name) is not None:
            params[name] = getattr(args, name)
    try:
        phys = PhysParams(**params)
    except SchrodingerOTError as exc:
        raise ConfigError(str(exc)) from None
    seed = args.seed if args.seed is not None else doc.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigError("seed must be a nonnegative integer")
    fmt = args.format or doc.get("output_format", "json")
    if fmt not in ("csv", "json"):
        raise ConfigError("output_format must be csv or json")
    suite = getattr(args, "suite", None) or doc.get("suite", "all")
    if suite not in SUITES + ("all",):
        raise ConfigError(f"unknown suite {suite!r}")
    grid = getattr(args, "t_grid", None)
    grid = parse_t_grid(grid if grid is not None else doc.get("t_grid", [0.0, 1.0, 2.0]))
    tolerances = doc.get("tolerances", {})
    if not isinstance(tolerances, dict):
        raise ConfigError("tolerances must be an object")
    return RunConfig(
        params=phys,
        seed=seed,
        tolerances=merge_tolerances(tolerances),
        output_format=fmt,
        output_path=args.out if args.out is not None else doc.get("output_path"),
        suite=suite,
        t_grid=grid,
    )


def _header(cfg: RunConfig, command: str) -> dict:
    return {
        "command": command,
        "version": __version__,
        "config": cfg.to_dict(),
        "rng_algorithm": RNG_ALGORITHM,
        "seed": cfg.seed,
    }


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, float):
        return "%.17g" % v
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return json.dumps(v, sort_keys=True, default=_json_default)


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    raise TypeError(f"not serializable: {type(obj).__name__}")


def render_csv(header: dict, columns, rows) -> str:
    buf = io.StringIO()
    for key, value in header.items():
        buf.write(f"# {key}: {json.dumps(value, sort_keys=True)}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_fmt(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(doc: dict) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default, allow_nan=True) + "\n"


def emit(text: str, cfg: RunConfig) -> None:
    if cfg.output_path:
        with open(cfg.output_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def sweep_rows(p: PhysParams, grid) -> list[dict]:
    return [
        {
            "t": t,
            "W_0_t": analytic.w2_closed_form(p, 0.0, t),
            "metric_derivative": analytic.metric_derivative(p, t),
            "fisher_information": analytic.fisher_information(p, t),
            "variance": analytic.variance(p, t),
            "phase_coefficient": analytic.phase_coefficient(p, t),
        }
        for t in grid
    ]


def cmd_sweep(cfg: RunConfig) -> int:
    rows = sweep_rows(cfg.params, cfg.t_grid)
    header = _header(cfg, "sweep")
    if cfg.output_format == "csv":
        emit(render_csv(header, SWEEP_COLUMNS, rows), cfg)
    else:
        emit(render_json({**header, "columns": list(SWEEP_COLUMNS), "rows": rows}), cfg)
    return EXIT_OK


def verify_report(cfg: RunConfig) -> dict:
    ctx = SuiteContext(cfg.params, cfg.seed, cfg.tolerances)
    checks, errata = run_suite(cfg.suite, ctx)
    failures = [c["name"] for c in checks if not c["pass"]]
    return {
        **_header(cfg, "verify"),
        "suite": cfg.suite,
        "checks": checks,
        "errata": errata,
        "passed": not failures,
        "failures": failures,
    }


VERIFY_COLUMNS = ("name", "paper_ref", "computed", "oracle", "error", "tolerance", "pass")


def cmd_verify(cfg: RunConfig) -> int:
    report = verify_report(cfg)
    if cfg.output_format == "csv":
        header = _header(cfg, "verify")
        header["errata"] = report["errata"]
        header["failures"] = report["failures"]
        emit(render_csv(header, VERIFY_COLUMNS, report["checks"]), cfg)
    else:
        emit(render_json(report), cfg)
    if report["failures"]:
        print("failing checks: " + ", ".join(report["failures"]), file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


def shape_record(cfg: RunConfig, s: float, t: float, init) -> dict:
    search = IsometrySearchConfig(translation_init=init)
    res = shape_distance(cfg.params, s, t, search)
    w = analytic.w2_closed_form(cfg.params, s, t)
    return {
        "s": s,
        "t": t,
        "D": res.value,
        "W_closed_form": w,
        "gap": abs(res.value - w),
        "rotation": res.isometry.rotation,
        "translation": res.isometry.translation,
        "evaluations": res.evaluations,
        "simplex_diameter": res.simplex_diameter,
    }


def cmd_shape_distance(cfg: RunConfig, s: float, t: float, init) -> int:
    try:
        record = shape_record(cfg, s, t, init)
    except NoConvergence as exc:
        print(f"shape distance did not converge: {exc}", file=sys.stderr)
        return EXIT_FAIL
    header = _header(cfg, "shape-distance")
    if cfg.output_format == "csv":
        emit(render_csv(header, tuple(record), [record]), cfg)
    else:
        emit(render_json({**header, "result": record}), cfg)
    return EXIT_OK


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="JSON config file; flags override its values")
    sub.add_argument("--hbar", type=float)
    sub.add_argument("--mass", type=float)
    sub.add_argument("--width", type=float)
    sub.add_argument("--seed", type=int)
    sub.add_argument("--format", choices=("csv", "json"))
    sub.add_argument("--out", help="write output here instead of stdout")


def _nonneg_time(text: str) -> float:
    value = float(text)
    if not np.isfinite(value) or value < 0:
        raise argparse.ArgumentTypeError("time must be finite and nonnegative")
    return value


def _vector3(text: str) -> tuple:
    parts = [float(v) for v in text.split(",")]
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated numbers")
    return tuple(parts)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="schrodinger-ot", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    subs = parser.add_subparsers(dest="command", required=True)

    sweep = subs.add_parser("sweep", help="tabulate distance, speed, Fisher information, variance and K(t)")
    _add_common(sweep)
    sweep.add_argument("--t-grid", dest="t_grid", help="comma-separated, strictly increasing times")

    verify = subs.add_parser("verify", help="run oracle comparison suites and report errata")
    _add_common(verify)
    verify.add_argument("--suite", choices=SUITES + ("all",))

    sd = subs.add_parser("shape-distance", help="minimize W2 over isometries between two packet times")
    _add_common(sd)
    sd.add_argument("s", type=_nonneg_time)
    sd.add_argument("t", type=_nonneg_time)
    sd.add_argument("--init", type=_vector3, default=(0.0, 0.0, 0.0), help="initial translation a, as x,y,z")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = build_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.command == "sweep":
        return cmd_sweep(cfg)
    if args.command == "verify":
        return cmd_verify(cfg)
    return cmd_shape_distance(cfg, args.s, args.t, args.init)


if __name__ == "__main__":
    sys.exit(main())
