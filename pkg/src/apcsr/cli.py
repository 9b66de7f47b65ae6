"""Command-line interface: ``apcsr fit|calibrate|monitor|diagnose|experiment|synth-image``.

Exit codes: 0 clean, 10 alarm raised by ``monitor``, 2 usage error, 3 data error.
Every output file gets a ``<output>.manifest.json`` written beside it.
"""
from __future__ import annotations

import argparse
import configparser
import datetime as _dt
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .diagnosis import PathConfig, diagnose, diagnose_leb
from .io import DataError, read_image, read_matrix_csv, write_chart_csv, write_matrix_csv, write_pgm_p2
from .monitoring import MonitorConfig, MonitorState, calibrate, monitor_step
from .pca import PCModel, fit_pca
from .simulation import (
    RollingImageSpec,
    ScenarioSpec,
    run_arl_experiment,
    run_diagnosis_experiment,
    run_type1_table,
    synthetic_rolling_image,
)

EXIT_CLEAN = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_ALARM = 10

log = logging.getLogger("apcsr")


class UsageError(Exception):
    pass


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def write_manifest(output: Path, args: argparse.Namespace, inputs: Sequence[str], started: str,
                   seed: int | None = None, config: str | None = None, extra: dict | None = None) -> Path:
    """Write ``<output>.manifest.json`` recording how ``output`` was produced."""
    manifest = {
        "command": args.command,
        "argv": list(args.argv),
        "config": config,
        "seed": seed,
        "inputs": [str(p) for p in inputs],
        "output": str(output),
        "tool_version": __version__,
        "started": started,
        "finished": _now(),
    }
    if extra:
        manifest.update(extra)
    path = output.with_name(output.name + ".manifest.json")
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    return path


def _dump_json(path: Path, blob: dict) -> None:
    path.write_text(json.dumps(blob, indent=2) + "\n", encoding="utf-8")


def _load_model(path: str) -> PCModel:
    try:
        return PCModel.load(path)
    except FileNotFoundError:
        raise DataError("model file not found", path) from None
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"invalid model file: {exc}", path) from None


# --------------------------------------------------------------------------
# commands


def cmd_fit(args) -> int:
    started = _now()
    x, names = read_matrix_csv(args.input, header=args.header)
    try:
        model = fit_pca(x, args.eig_floor, standardize=args.standardize, columns=names)
    except ValueError as exc:
        raise DataError(str(exc), args.input) from None
    out = Path(args.out)
    model.save(out)
    write_manifest(out, args, [args.input], started)
    print(f"fitted p={model.p} from n={x.shape[0]} rows -> {out}")
    return EXIT_CLEAN


def _monitor_config(args) -> MonitorConfig:
    try:
        return MonitorConfig(
            gamma=args.gamma,
            nu=args.nu,
            alpha=args.alpha,
            target_arl=args.target_arl if args.alpha is None else None,
            ewma_variance_mode=args.variance_mode,
            calibration_mode=args.mode,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_calibrate(args) -> int:
    started = _now()
    cfg = _monitor_config(args)
    if args.reps < 100 and cfg.resolved_calibration(1) != "analytic":
        raise UsageError("--reps must be >= 100 for Monte-Carlo calibration")
    model = _load_model(args.model)
    res = calibrate(model, cfg, reps=args.reps, seed=args.seed)
    blob = res.to_dict(cfg)
    blob["p"] = model.p
    out = Path(args.out)
    _dump_json(out, blob)
    write_manifest(out, args, [args.model], started, seed=args.seed)
    msg = f"R0 = {res.r0:.6g} ({res.method})"
    if res.method == "monte_carlo":
        msg += f", empirical ARL {res.empirical_arl:.1f} +/- {res.arl_se:.1f}"
    print(msg)
    return EXIT_CLEAN


def _load_calibration(path: str) -> tuple[MonitorConfig, float]:
    try:
        blob = json.loads(Path(path).read_text(encoding="utf-8"))
        cfg = MonitorConfig(
            gamma=float(blob["gamma"]),
            nu=float(blob["nu"]),
            alpha=float(blob["alpha"]),
            ewma_variance_mode=blob.get("ewma_variance_mode", "asymptotic"),
        )
        return cfg, float(blob["r0"])
    except FileNotFoundError:
        raise DataError("calibration file not found", path) from None
    except (KeyError, ValueError, TypeError) as exc:
        raise DataError(f"invalid calibration file: {exc}", path) from None


def cmd_monitor(args) -> int:
    started = _now()
    model = _load_model(args.model)
    cfg, r0 = _load_calibration(args.calibration)
    if args.image:
        x = read_image(args.input)
    else:
        x = read_matrix_csv(args.input, header=args.header)[0]
    if x.shape[1] != model.p:
        raise DataError(f"input has {x.shape[1]} columns but the model expects {model.p}", args.input)
    state = MonitorState.initial(model.p, r0)
    points = [monitor_step(state, model, row, cfg) for row in x]
    out = Path(args.out)
    write_chart_csv(out, points, r0, state.first_alarm, contributions=args.contributions)
    write_manifest(out, args, [args.model, args.calibration, args.input], started,
                   extra={"first_alarm": state.first_alarm, "rows": len(points)})
    if state.tripped:
        print(f"alarm at t={state.first_alarm}")
        return EXIT_ALARM
    print(f"clean: no alarm in {len(points)} observations")
    return EXIT_CLEAN


def cmd_diagnose(args) -> int:
    started = _now()
    model = _load_model(args.model)
    if args.image:
        x = read_image(args.input)
    else:
        x = read_matrix_csv(args.input, header=args.header)[0]
    if x.shape[0] == 0:
        raise DataError("empty out-of-control window", args.input)
    if x.shape[1] != model.p:
        raise DataError(f"input has {x.shape[1]} columns but the model expects {model.p}", args.input)
    if args.path_points < 2:
        raise UsageError("--path-points must be >= 2")
    path_cfg = PathConfig(n_points=args.path_points)
    res = (diagnose if args.method == "pcsr" else diagnose_leb)(model, x, path_cfg)
    blob = res.to_dict(model.columns)
    blob["method"] = args.method
    blob["m"] = int(x.shape[0])
    out = Path(args.out)
    _dump_json(out, blob)
    write_manifest(out, args, [args.model, args.input], started)
    shifts = res.mu_hat_original
    print(f"{len(res.support)} shifted variable(s) ({args.method}, m={x.shape[0]})")
    if len(res.support):
        print(f"{'index':>6}  {'name':<16} {'shift':>12}")
        for j in res.support:
            name = model.columns[j] if model.columns else ""
            print(f"{j:>6}  {name:<16} {shifts[j]:>12.5g}")
    return EXIT_CLEAN


# --------------------------------------------------------------------------
# experiments


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.replace(",", " ").split()]


def _ints(text: str) -> list[int]:
    return [int(v) for v in text.replace(",", " ").split()]


def _scenario(cp: configparser.ConfigParser, delta: float) -> ScenarioSpec:
    sc = cp["scenario"]
    wdf = sc.get("wishart_df", fallback="").strip()
    return ScenarioSpec(
        kind=sc.get("kind"),
        p=sc.getint("p"),
        blocks=sc.getint("blocks", fallback=12),
        rho=sc.getfloat("rho", fallback=0.5),
        shift_fraction=sc.getfloat("shift_fraction", fallback=0.2),
        delta=delta,
        seed=cp["experiment"].getint("seed", fallback=0),
        wishart_df=int(wdf) if wdf else None,
    )


def run_experiment_config(path: str | Path):
    """Parse an INI experiment file and run it; returns ``(name, report)``."""
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not cp.read(path, encoding="utf-8"):
        raise DataError("config file not found", path)
    try:
        ex = cp["experiment"]
        kind = ex.get("kind")
        name = ex.get("name", fallback=Path(path).stem)
        seed = ex.getint("seed", fallback=0)
        reps = ex.getint("reps", fallback=200)
        if kind == "type1":
            t1 = cp["type1"]
            report = run_type1_table(
                t1.get("mode", fallback="iid_chisq"),
                _ints(t1.get("p")),
                _floats(t1.get("nu")),
                alpha=t1.getfloat("alpha", fallback=0.005),
                reps=reps,
                seed=seed,
                horizon=t1.getint("horizon", fallback=1000),
                gamma=t1.getfloat("gamma", fallback=0.4),
                ewma_variance_mode=t1.get("ewma_variance_mode", fallback="paper"),
            )
        elif kind == "arl":
            a = cp["arl"] if cp.has_section("arl") else {}
            deltas = _floats(cp["scenario"].get("delta", fallback="0.1"))
            spec = _scenario(cp, deltas[0])
            methods = [m.strip() for m in a.get("methods", "apc, pca_t2q").split(",") if m.strip()]
            target = float(a.get("target_arl", 200))
            cfg = None
            if "gamma" in a or "nu" in a:
                from .simulation import ARL_MONITOR
                cfg = MonitorConfig(gamma=float(a.get("gamma", ARL_MONITOR["gamma"])),
                                    nu=float(a.get("nu", ARL_MONITOR["nu"])), target_arl=target)
            report = run_arl_experiment(spec, methods, target, reps, seed, deltas=deltas, apc_cfg=cfg,
                                        calib_reps=int(a.get("calib_reps", 1000)),
                                        change_time=int(a.get("change_time", 50)))
        elif kind == "diagnosis":
            d = cp["diagnosis"] if cp.has_section("diagnosis") else {}
            deltas = _floats(cp["scenario"].get("delta", fallback="1.0"))
            spec = _scenario(cp, deltas[0])
            methods = [m.strip() for m in d.get("methods", "pcsr, leb").split(",") if m.strip()]
            report = run_diagnosis_experiment(spec, methods, reps, seed, deltas=deltas, m=int(d.get("m", 25)),
                                              path_cfg=PathConfig(n_points=int(d.get("path_points", 50))))
        else:
            raise UsageError(f"unknown experiment kind {kind!r} (expected type1, arl or diagnosis)")
    except (KeyError, configparser.Error) as exc:
        raise UsageError(f"{path}: bad config: {exc}") from None
    except ValueError as exc:
        raise UsageError(f"{path}: {exc}") from None
    return name, report


def cmd_experiment(args) -> int:
    started = _now()
    name, report = run_experiment_config(args.config)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{name}.csv"
    json_path = out_dir / f"{name}.json"
    report.to_csv(csv_path)
    report.to_json(json_path)
    seed = report.config.get("seed")
    for p in (csv_path, json_path):
        write_manifest(p, args, [args.config], started, seed=seed, config=str(args.config))
    cols, rows = report.table()
    print(",".join(cols))
    for row in rows:
        print(",".join(str(_short(row.get(c))) for c in cols))
    print(f"wrote {csv_path} and {json_path} ({report.runtime:.1f} s)")
    return EXIT_CLEAN


def _short(v):
    return format(v, ".4g") if isinstance(v, float) else v


def cmd_synth_image(args) -> int:
    started = _now()
    spec = RollingImageSpec(n_phase1=args.phase1_rows)
    img = synthetic_rolling_image(spec, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    p1 = out / "phase1.csv"
    pgm = out / "image.pgm"
    write_matrix_csv(p1, np.clip(np.rint(img.phase1), 0, 255))
    write_pgm_p2(pgm, img.image)
    for p in (p1, pgm):
        write_manifest(p, args, [], started, seed=args.seed,
                       extra={"change_row": img.change_row + 1, "shifted_columns": img.shifted_cols.tolist()})
    print(f"wrote {p1} and {pgm}; defect from row {img.change_row + 1}, "
          f"columns {img.shifted_cols[0]}..{img.shifted_cols[-1]} (0-based)")
    return EXIT_CLEAN


# --------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="apcsr", description="APC monitoring and PCSR diagnosis of data streams.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a PCA reference model from in-control rows")
    f.add_argument("input")
    f.add_argument("--out", required=True)
    f.add_argument("--header", action="store_true", help="first line holds column names")
    f.add_argument("--eig-floor", type=float, default=None, help="eigenvalue floor (default 1e-8 * largest)")
    f.add_argument("--standardize", action="store_true", help="divide each column by its standard deviation")
    f.set_defaults(func=cmd_fit)

    c = sub.add_parser("calibrate", help="set the control limit R0")
    c.add_argument("model")
    c.add_argument("--out", required=True)
    c.add_argument("--gamma", type=float, default=0.4)
    c.add_argument("--nu", type=float, default=0.5)
    g = c.add_mutually_exclusive_group()
    g.add_argument("--target-arl", type=float, default=200.0)
    g.add_argument("--alpha", type=float, default=None)
    c.add_argument("--mode", choices=("analytic", "monte_carlo", "auto"), default="auto")
    c.add_argument("--variance-mode", choices=("paper", "asymptotic", "exact_time_varying"), default="asymptotic")
    c.add_argument("--reps", type=int, default=1000)
    c.add_argument("--seed", type=int, default=0)
    c.set_defaults(func=cmd_calibrate)

    m = sub.add_parser("monitor", help="run the APC chart over a file of observations")
    m.add_argument("model")
    m.add_argument("calibration")
    m.add_argument("input")
    m.add_argument("--out", required=True, help="chart CSV")
    m.add_argument("--image", action="store_true", help="input is a PGM (P2) or CSV pixel matrix")
    m.add_argument("--header", action="store_true")
    m.add_argument("--contributions", action="store_true", help="add per-PC contribution columns")
    m.set_defaults(func=cmd_monitor)

    d = sub.add_parser("diagnose", help="identify shifted variables in a post-alarm window")
    d.add_argument("model")
    d.add_argument("input")
    d.add_argument("--out", required=True)
    d.add_argument("--method", choices=("pcsr", "leb"), default="pcsr")
    d.add_argument("--path-points", type=int, default=50)
    d.add_argument("--image", action="store_true")
    d.add_argument("--header", action="store_true")
    d.set_defaults(func=cmd_diagnose)

    e = sub.add_parser("experiment", help="run a simulation experiment from an INI config")
    e.add_argument("config")
    e.add_argument("--out-dir", default=".")
    e.set_defaults(func=cmd_experiment)

    s = sub.add_parser("synth-image", help="write a synthetic rolling-surface image and Phase-I rows")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--phase1-rows", type=int, default=RollingImageSpec.n_phase1)
    s.set_defaults(func=cmd_synth_image)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    args.argv = argv
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"apcsr {args.command}: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"apcsr {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"apcsr {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
