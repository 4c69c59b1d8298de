"""Command-line entry point: ``exotension identify | simulate | metrics``.

Exit status is 0 on success, 2 for configuration or input-file errors and
3 for failures while running.
"""
from __future__ import annotations

import argparse
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, records
from .config import ConfigError, RunConfig, load
from .controller import DirectionalRegression
from .identification import EmptySelectionError, identify_detailed
from .metrics import (InsufficientDataError, PhaseSplitStat, emg_envelope, iemg,
                      normalization_scale, sparc, trial_metrics)
from .plantsim.protocols import run_identification_protocol, run_trial_protocol

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

logger = logging.getLogger("exotension")


class InputError(ValueError):
    """Bad input file other than the config; maps to the config exit code."""


def _load_config(args) -> RunConfig:
    cfg = load(args.config)
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    return cfg


def _out_dir(args, cfg: RunConfig) -> Path:
    out = Path(args.out if args.out is not None else cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# -- identify --------------------------------------------------------------------

def cmd_identify(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    ident = cfg.raw["protocol"]["identification"]
    model = cfg.transmission()
    run = run_identification_protocol(model, cfg.plant(), cfg.identification_protocol(),
                                      noise=ident["tension_noise_n"], tdu=cfg.tdu(),
                                      seed=cfg.rng_seed)
    for b in run.infeasible:
        logger.warning("infeasible condition: %+.2f rad/s, load %.2f Nm, rep %d "
                       "(peak %.2f Nm)", b.velocity, b.load, b.repetition, b.peak_torque)
    res = identify_detailed(run.log, cfg.steady_state(), ident["filter_cutoff_hz"],
                            ident["filter_order"])
    reg = res.regression

    records.save_sample_log(out / "sample_log.csv", run.log)
    records.write_json(out / "regression.json", reg.to_dict())
    exact = DirectionalRegression.from_model(model) if model.mu > 0 else None
    summary = {
        "raising": res.raising.to_dict(),
        "lowering": res.lowering.to_dict(),
        "analytic_slope_raising": model.pulley_radius / model.raising_gain,
        "analytic_slope_lowering": model.pulley_radius / model.lowering_gain,
        "blocks": len(run.blocks),
        "infeasible_blocks": [
            {"velocity_rad_s": b.velocity, "load_nm": b.load, "repetition": b.repetition,
             "peak_torque_nm": b.peak_torque} for b in run.infeasible],
        "seed": cfg.rng_seed,
    }
    if exact is not None:
        summary["slope_error_raising"] = reg.slope_raising / exact.slope_raising - 1.0
        summary["slope_error_lowering"] = reg.slope_lowering / exact.slope_lowering - 1.0
    records.write_json(out / "regression_summary.json", summary)

    flog = res.filtered_log
    rows = [(float(flog.load_cell_tension[i]), float(flog.tdu_torque[i]), d)
            for d, idx in (("raising", res.raising_idx), ("lowering", res.lowering_idx))
            for i in idx]
    records.write_table(out / "scatter.csv", ("tension_n", "torque_nm", "direction"), rows)
    if args.plots:
        _plot_scatter(out / "regression.svg", rows, reg)
    print(f"raising:  m={reg.slope_raising:.6g} b={reg.intercept_raising:.4g} "
          f"R2={reg.r2_raising:.4f} n={res.raising.sample_count}")
    print(f"lowering: m={reg.slope_lowering:.6g} b={reg.intercept_lowering:.4g} "
          f"R2={reg.r2_lowering:.4f} n={res.lowering.sample_count}")
    return EXIT_OK


# -- simulate --------------------------------------------------------------------

def _condition_seed(root: int, i: int, j: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root, spawn_key=(i, j))


def _slug(name: str) -> str:
    return "".join(c if c.isalnum() else ("pct" if c == "%" else "_") for c in name)


def _simulate_condition(task):
    """Worker: one (support, speed) condition; returns the log and its metrics."""
    raw, reg_dict, i, j = task
    cfg = RunConfig(raw)
    trial = cfg.trial_protocol()
    support = trial.supports[i]
    speed = trial.peak_speeds_deg_s[j]
    ctl = cfg.controller(DirectionalRegression.from_dict(reg_dict), support.support_fraction)
    log = run_trial_protocol(ctl, cfg.transmission(), cfg.plant(), trial, speed,
                             human=cfg.human(), tdu=cfg.tdu(),
                             load_cell_noise=raw["plant"]["load_cell_noise_n"],
                             seed=_condition_seed(cfg.rng_seed, i, j))
    m = raw["metrics"]
    row = trial_metrics(log, m["drop_first"], cfg.sparc(), m["n_points"])
    return i, j, log, row


METRIC_COLUMNS = ("tension_rmse_entire", "tension_rmse_raising", "tension_rmse_lowering",
                  "torque_rmse_entire", "torque_rmse_raising", "torque_rmse_lowering",
                  "angle_rmse_deg", "sparc", "tension_pct_rmse", "torque_pct_rmse",
                  "peak_error_normalized_time")


def _read_regression(path) -> DirectionalRegression:
    try:
        return DirectionalRegression.from_dict(records.read_json(path))
    except FileNotFoundError:
        raise InputError(f"regression file not found: {path}") from None
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{path}: invalid regression ({exc})") from None


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    if args.regression is not None:
        reg = _read_regression(args.regression)
    else:
        reg = cfg.regression()
        if reg is None:
            raise InputError("no regression: pass --regression or set the controller "
                             "m_raise/b_raise/m_lower/b_lower keys")
    out = _out_dir(args, cfg)
    trial = cfg.trial_protocol()
    tasks = [(cfg.raw, reg.to_dict(), i, j) for i in range(len(trial.supports))
             for j in range(len(trial.peak_speeds_deg_s))]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_simulate_condition, tasks))
    else:
        results = [_simulate_condition(t) for t in tasks]

    # single writer, fixed order
    header = ("support", "support_fraction", "peak_speed_deg_s") + METRIC_COLUMNS
    rows = []
    for i, j, log, row in results:
        support = trial.supports[i]
        speed = trial.peak_speeds_deg_s[j]
        stem = f"trial_{_slug(support.name)}_{int(round(speed))}"
        records.save_trial_log(out / "trials" / f"{stem}.csv", log)
        rows.append((support.name, support.support_fraction, speed)
                    + tuple(row[c] for c in METRIC_COLUMNS))
    records.write_table(out / "metrics_table.csv", header, rows)
    records.write_json(out / "simulate_meta.json",
                       {"seed": cfg.rng_seed, "regression": reg.to_dict(),
                        "conditions": len(rows), "version": __version__})
    if args.plots:
        _plot_errors(out / "tension_error.svg", results, trial)
    print(f"wrote {len(rows)} conditions to {out / 'metrics_table.csv'}")
    return EXIT_OK


# -- metrics ---------------------------------------------------------------------

RESERVED = ("repetition", "raising", "elevation_speed_rad_s")


def _phase_bounds(raising):
    """``(0, switch, n)`` for a raising-then-lowering mask, else InputError."""
    r = np.asarray(raising, dtype=bool)
    switch = int(np.argmin(r)) if not r.all() else r.size
    if np.any(r[switch:]) or switch == 0 or switch == r.size:
        raise InputError("each repetition must be one raising block followed by one "
                         "lowering block")
    return 0, switch, r.size


def cmd_metrics(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args, cfg)
    try:
        t, names, data = records.load_recordings(args.recordings)
    except FileNotFoundError:
        raise InputError(f"recordings file not found: {args.recordings}") from None
    cols = dict(zip(names, data))
    channels = [n for n in names if n not in RESERVED]
    rate = (t.size - 1) / (t[-1] - t[0])
    m = cfg.raw["metrics"]

    env = np.vstack([emg_envelope(cols[c], rate, cfg.envelope()) for c in channels]) \
        if channels else np.empty((0, t.size))
    rep = cols.get("repetition", np.zeros(t.size)).astype(int)
    reps = np.unique(rep)
    kept = reps[1:] if (m["drop_first"] and reps.size > 1) else reps

    scale = {c: 1.0 for c in channels}
    if args.normalize_by is not None:
        rt, rnames, rdata = records.load_recordings(args.normalize_by)
        rcols = dict(zip(rnames, rdata))
        rrate = (rt.size - 1) / (rt[-1] - rt[0])
        rrep = rcols.get("repetition", np.zeros(rt.size)).astype(int)
        rreps = np.unique(rrep)
        rkept = rreps[1:] if (m["drop_first"] and rreps.size > 1) else rreps
        for c in channels:
            if c not in rcols:
                raise InputError(f"{args.normalize_by}: channel {c!r} missing")
            renv = emg_envelope(rcols[c], rrate, cfg.envelope())
            scale[c] = normalization_scale([renv[rrep == k] for k in rkept])
    env = env / np.array([scale[c] for c in channels])[:, None] if channels else env

    records.write_columns(out / "envelopes.csv",
                          {"t_s": t, **{c: env[k] for k, c in enumerate(channels)}})

    iemg_rows = []
    summary = {"channels": channels, "repetitions_used": [int(k) for k in kept],
               "normalization_scale": scale, "iemg": {}, "sparc": None}
    for k_ch, c in enumerate(channels):
        stats = []
        for k in kept:
            sel = rep == k
            e = env[k_ch, sel]
            if "raising" in cols:
                bounds = _phase_bounds(cols["raising"][sel] > 0.5)
                s = iemg(e, bounds)
            else:
                whole = float(np.mean(e))
                s = PhaseSplitStat(whole, math.nan, math.nan)
            stats.append(s)
            iemg_rows.append((c, int(k), s.entire, s.raising, s.lowering))
        summary["iemg"][c] = {
            "entire": float(np.mean([s.entire for s in stats])),
            "raising": _nanmean([s.raising for s in stats]),
            "lowering": _nanmean([s.lowering for s in stats]),
        }
    records.write_table(out / "iemg.csv", ("channel", "repetition", "entire", "raising",
                                           "lowering"), iemg_rows)

    if "elevation_speed_rad_s" in cols:
        sp = cfg.sparc()
        values = [(int(k), sparc(np.abs(cols["elevation_speed_rad_s"][rep == k]), rate,
                                 sp.freq_cutoff, sp.amp_threshold, sp.pad_level))
                  for k in kept]
        records.write_table(out / "sparc.csv", ("repetition", "sparc"), values)
        summary["sparc"] = float(np.mean([v for _, v in values]))
    records.write_json(out / "metrics_summary.json", _json_safe(summary))
    print(f"{len(channels)} channel(s), {len(kept)} repetition(s) -> {out}")
    return EXIT_OK


def _nanmean(values):
    v = np.asarray(values, dtype=float)
    return None if np.all(np.isnan(v)) else float(np.nanmean(v))


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# -- plots -----------------------------------------------------------------------

def _pyplot():
    try:
        import matplotlib
    except ImportError:
        logger.warning("matplotlib not installed; skipping plots")
        return None
    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "exotension"
    import matplotlib.pyplot as plt
    return plt


def _plot_scatter(path, rows, reg):
    plt = _pyplot()
    if plt is None:
        return
    fig, ax = plt.subplots(figsize=(5, 4))
    for d, color in (("raising", "tab:red"), ("lowering", "tab:blue")):
        x = np.array([r[0] for r in rows if r[2] == d])
        y = np.array([r[1] for r in rows if r[2] == d])
        step = max(1, x.size // 2000)
        ax.plot(x[::step], y[::step], ".", ms=2, color=color, alpha=0.4, label=d)
        if x.size:
            xx = np.array([x.min(), x.max()])
            line = reg.raising_torque(xx) if d == "raising" else reg.lowering_torque(xx)
            ax.plot(xx, line, color=color)
    ax.set_xlabel("output tension [N]")
    ax.set_ylabel("motor torque [Nm]")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


def _plot_errors(path, results, trial):
    plt = _pyplot()
    if plt is None:
        return
    fig, axes = plt.subplots(1, len(trial.supports), figsize=(4 * len(trial.supports), 3),
                             squeeze=False, sharey=True)
    grid = np.linspace(0, 1, 501)
    for i, j, log, _ in results:
        reps = np.unique(log.repetition)[1:]
        if reps.size == 0:
            continue
        traces = [np.interp(grid, log.normalized_time[log.repetition == k],
                            log.tension_error[log.repetition == k]) for k in reps]
        axes[0, i].plot(grid, np.mean(traces, axis=0),
                        label=f"{trial.peak_speeds_deg_s[j]:g} deg/s")
    for i, s in enumerate(trial.supports):
        axes[0, i].set_title(s.name)
        axes[0, i].set_xlabel("normalized time")
    axes[0, 0].set_ylabel("tension error [N]")
    axes[0, 0].legend()
    fig.tight_layout()
    fig.savefig(path, metadata={"Date": None})
    plt.close(fig)


# -- entry point -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="exotension", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", required=True, help="JSON run configuration")
        sp.add_argument("--out", help="output directory (default: config output_dir)")
        sp.add_argument("--seed", type=int, help="override rng_seed from the config")
        sp.add_argument("--plots", action="store_true", help="also write SVG plots")

    sp = sub.add_parser("identify", help="run the mannequin sweep and fit the inverse model")
    common(sp)
    sp.set_defaults(func=cmd_identify)

    sp = sub.add_parser("simulate", help="run the trial grid and tabulate tracking metrics")
    common(sp)
    sp.add_argument("--regression", help="regression JSON written by identify")
    sp.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("metrics", help="EMG envelopes, iEMG and SPARC from recordings")
    common(sp)
    sp.add_argument("--recordings", required=True, help="CSV: time column then channels")
    sp.add_argument("--normalize-by", help="no-suit recordings used for EMG normalisation")
    sp.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    if getattr(args, "seed", None) is not None and not 0 <= args.seed < 2 ** 64:
        print("error: --seed must be an unsigned 64-bit integer", file=sys.stderr)
        return EXIT_CONFIG
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InputError, records.SchemaError) as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (EmptySelectionError, InsufficientDataError, ValueError, RuntimeError,
            OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
