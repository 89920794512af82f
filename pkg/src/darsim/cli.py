"""Command-line entry point: ``darsim {predict,simulate,sweep,quest,analyze}``.

Every command reads one JSON config, prints a JSON summary (with the fully
resolved config echoed under ``"config"``) and writes its tables to the
output directory. Exit codes: 0 success, 2 configuration error, 3 domain
or numeric error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from . import config as cfgmod
from .analysis import SWEEP_CSV_HEADER, amplitude_sweep, estimate_snr, measure_levels
from .psychophysics import TRIAL_CSV_HEADER, run_sessions
from .quest import QuestError
from .resonator import (
    REGION_A,
    RegionError,
    classify_region,
    predict_comparator,
    predict_lcd_level,
    predicted_level,
    triangle_slope,
)
from .signals import SignalError
from .stats import DegenerateInputError, bootstrap_cohens_d_paired, permutation_ttest_paired

OUTPUT_DIR_ENV = "DARSIM_OUTPUT_DIR"
DEFAULT_OUTPUT_DIR = "darsim-output"

EXIT_CONFIG = 2
EXIT_DOMAIN = 3


class ConfigError(Exception):
    pass


def _num(v):
    """Shortest round-trip text for a CSV cell."""
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if math.isfinite(f) else str(f)
    return obj


def dumps(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


def write_table(path: Path, header, rows, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    if fmt == "json":
        path.write_text(dumps([{k: r[k] for k in header} for r in rows]))
        return path
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_num(r[k]) for k in header])
    return path


def load_config(path):
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except json.JSONDecodeError as e:
        raise ConfigError(f"config is not valid JSON: {e}")
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw


def validate(raw: dict, model):
    try:
        return model.model_validate(raw)
    except ValidationError as e:
        raise ConfigError(str(e))


def output_dir(args, required: bool):
    out = args.out or os.environ.get(OUTPUT_DIR_ENV)
    if out is None and required:
        out = DEFAULT_OUTPUT_DIR
    if out is None:
        return None
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


# -- commands ----------------------------------------------------------------


def cmd_predict(cfg: cfgmod.PredictConfig) -> dict:
    report = {}
    region = None
    if None not in (cfg.u_s, cfg.u_t, cfg.u_th):
        region = classify_region(cfg.kind, cfg.u_s, cfg.u_t, cfg.u_th)
        report["region"] = region.label
        report["region_condition"] = region.condition
        if region.label == REGION_A:
            raise RegionError(f"no output in region A: {region.condition}")
        report["slope"] = triangle_slope(cfg.f_t, cfg.u_t)
    if cfg.kind == "lcd":
        report["level"] = predict_lcd_level(cfg.f_t, cfg.tau, cfg.u_lcd)
        report["low_level"] = 0.0
    else:
        pred = predict_comparator(cfg.u_s, cfg.u_t, cfg.u_th, cfg.u_h, cfg.f_t)
        report.update(level=pred.level, t_h=pred.t_h, t_r=pred.t_r)
    return report


def _pipeline_block(raw, model, seed):
    if seed is not None:
        raw = dict(raw, seed=seed)
    block = validate(raw, model)
    if block.seed is not None:
        block.carrier.seed = block.seed
    return block


def cmd_simulate(block: cfgmod.SimulateConfig):
    pipe = block.build()
    run = pipe.run()
    high, low = measure_levels(run, pipe.schedule())
    carrier = pipe.carrier
    try:
        predicted = predicted_level(pipe.element, carrier.kind, pipe.signal.u_high, carrier.amplitude, carrier.f_t)
    except SignalError:
        predicted = None
    rel_err = None
    if predicted is not None and predicted != 0 and math.isfinite(high):
        rel_err = abs(high - predicted) / abs(predicted)
    summary = {
        "measured_high_level": high,
        "measured_low_level": low,
        "predicted_high_level": predicted,
        "relative_error": rel_err,
        "region": classify_region(pipe.element.kind, pipe.signal.u_high, carrier.amplitude, pipe.element.u_th).label,
        "n_samples": len(run.input),
        "sample_rate_hz": run.input.sample_rate_hz,
        "n_crossings": int(run.crossing_times.size),
    }
    try:
        snr = estimate_snr(run, pipe.signal.f_s)
        summary["snr_db"] = snr.snr_db
        summary["snr_effectively_infinite"] = snr.effectively_infinite
    except SignalError as e:
        summary["snr_db"] = None
        summary["snr_note"] = str(e)
    t = run.input.times
    rows = (
        {"time": t[i], "input": run.input.samples[i], "te_output": run.te_output.samples[i],
         "smoothed": run.smoothed_output.samples[i]}
        for i in range(t.size)
    )
    return summary, ("trace", ("time", "input", "te_output", "smoothed"), rows)


def cmd_sweep(block: cfgmod.SweepConfig, workers: int = 1):
    sw = block.sweep
    seeds = sw.seeds if sw.seeds else [block.seed if block.seed is not None else block.carrier.seed]
    sw.seeds = list(seeds)
    points = amplitude_sweep(
        block.build(),
        sw.carrier_kind,
        sw.u_t_grid,
        seeds=seeds,
        repeats=sw.repeats,
        n_harmonics=sw.n_harmonics,
        snr_band_hz=sw.snr_band_hz,
        linearity_grid=sw.linearity_u_s_grid,
        workers=workers,
    )
    rows = [p.row() for p in points]
    best = max(points, key=lambda p: p.transferred_amplitude)
    summary = {
        "n_points": len(points),
        "best_u_t_transferred_amplitude": best.u_t,
        "best_u_t_snr": max(points, key=lambda p: p.snr.snr_db).u_t,
        "regions": [p.region.label for p in points],
    }
    return summary, ("sweep", SWEEP_CSV_HEADER, rows)


def cmd_quest(cfg: cfgmod.QuestConfig, workers: int = 1):
    results = run_sessions(
        cfg.design.build(),
        cfg.observer.build(),
        cfg.quest.build(),
        n_sessions=cfg.n_sessions,
        seed=cfg.seed,
        workers=workers,
    )
    rows = [t.row() for r in results for t in r.trials]
    vct = np.array([r.vct for r in results])
    mod = np.array([r.modulation for r in results])
    summary = {
        "conditions": list(cfg.design.conditions),
        "sessions": [r.summary() for r in results],
        "mean_vct": vct.mean(axis=(0, 2)).tolist(),
        "mean_modulation_percent": mod.mean(axis=0).tolist(),
        "n_trials": len(rows),
    }
    return summary, ("trials", TRIAL_CSV_HEADER, rows)


def read_paired_columns(path, control, test):
    try:
        fh = open(path, newline="")
    except OSError as e:
        raise ConfigError(f"cannot read input CSV {path}: {e}")
    with fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ConfigError(f"{path}: empty CSV")
        for col in (control, test):
            if col not in reader.fieldnames:
                raise ConfigError(f"{path}: column {col!r} not found (have {reader.fieldnames})")
        c, t = [], []
        for lineno, row in enumerate(reader, start=2):
            for col, dest in ((control, c), (test, t)):
                val = row.get(col)
                try:
                    x = float(val)
                except (TypeError, ValueError):
                    raise ConfigError(f"{path}: row {lineno}, column {col!r}: not a number: {val!r}")
                if not math.isfinite(x):
                    raise ConfigError(f"{path}: row {lineno}, column {col!r}: non-finite value {val!r}")
                dest.append(x)
    return np.array(c), np.array(t)


def cmd_analyze(cfg: cfgmod.AnalyzeConfig, base_dir: Path):
    path = Path(cfg.input)
    if not path.is_absolute():
        path = base_dir / path
    c, t = read_paired_columns(path, cfg.control, cfg.test)
    if c.size < 3:
        raise ConfigError(f"{path}: need at least 3 rows, got {c.size}")
    perm = permutation_ttest_paired(c, t, cfg.n_reshuffles, seed=cfg.seed)
    eff = bootstrap_cohens_d_paired(c, t, cfg.n_bootstrap, seed=cfg.seed)
    summary = {
        "n_pairs": int(c.size),
        "mean_difference": perm.observed_stat,
        "p_value": perm.p_value,
        "n_reshuffles": perm.n_reshuffles,
        "cohens_d": eff.cohens_d,
        "ci_low": eff.ci_low,
        "ci_high": eff.ci_high,
        "n_bootstrap": eff.n_bootstrap,
    }
    return summary, None


# -- plumbing ----------------------------------------------------------------


def build_parser():
    p = argparse.ArgumentParser(prog="darsim", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("predict", "closed-form output levels and region"),
        ("simulate", "run one signal + carrier pipeline"),
        ("sweep", "carrier amplitude sweep"),
        ("quest", "simulated 4-AFC QUEST sessions"),
        ("analyze", "paired permutation test and BCa Cohen's d"),
    ):
        s = sub.add_parser(name, help=help_)
        s.add_argument("config", help="JSON config file")
        s.add_argument("--seed", type=int, help="override the master seed")
        s.add_argument("--out", help=f"output directory (default ${OUTPUT_DIR_ENV} or ./{DEFAULT_OUTPUT_DIR})")
        s.add_argument("--format", choices=("csv", "json"), default="csv", help="table format")
        s.add_argument("--workers", type=int, default=1, help="worker processes (results do not depend on it)")
    return p


def run(args) -> int:
    raw = load_config(args.config)
    base_dir = Path(args.config).resolve().parent
    table = None
    if args.command == "predict":
        cfg = validate(raw, cfgmod.PredictConfig)
        summary = cmd_predict(cfg)
    elif args.command == "simulate":
        cfg = _pipeline_block(raw, cfgmod.SimulateConfig, args.seed)
        summary, table = cmd_simulate(cfg)
    elif args.command == "sweep":
        cfg = _pipeline_block(raw, cfgmod.SweepConfig, args.seed)
        summary, table = cmd_sweep(cfg, args.workers)
    elif args.command == "quest":
        if args.seed is not None:
            raw = dict(raw, seed=args.seed)
        cfg = validate(raw, cfgmod.QuestConfig)
        summary, table = cmd_quest(cfg, args.workers)
    else:
        if args.seed is not None:
            raw = dict(raw, seed=args.seed)
        cfg = validate(raw, cfgmod.AnalyzeConfig)
        summary, table = cmd_analyze(cfg, base_dir)

    resolved = cfg.model_dump()
    summary = dict(summary, command=args.command, config=resolved)
    out = output_dir(args, required=table is not None)
    if out is not None:
        (out / f"{args.command}_config.json").write_text(dumps(resolved))
        (out / f"{args.command}_summary.json").write_text(dumps(summary))
        if table is not None:
            name, header, rows = table
            write_table(out / name, header, rows, args.format)
    sys.stdout.write(dumps(summary))
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return run(args)
    except ConfigError as e:
        print(f"darsim: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (RegionError, SignalError, QuestError, DegenerateInputError, FloatingPointError) as e:
        print(f"darsim: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
