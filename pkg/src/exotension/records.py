"""CSV and JSON reading and writing for logs, regressions and reports.

Floats are written with ``repr`` so that every value survives a round trip
bit for bit.  Readers report the offending row and column on bad input.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .identification import SampleLog
from .plantsim.protocols import TrialLog


class SchemaError(ValueError):
    """A CSV file does not match the expected layout."""


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if value is None:
        return ""
    return str(value)


def write_table(path, header, rows):
    """Write ``rows`` (sequences of scalars) under ``header``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def write_columns(path, columns: dict):
    names = list(columns)
    arrays = [np.asarray(columns[k]) for k in names]
    n = {a.shape[0] for a in arrays}
    if len(n) != 1:
        raise ValueError("columns must have equal length")
    write_table(path, names, zip(*(a.tolist() for a in arrays)))


def read_columns(path, expected=None) -> dict:
    """Read a numeric CSV into ``{column: float array}``.

    ``expected`` lists required column names (extra columns are kept).
    """
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if expected is not None:
            missing = [c for c in expected if c not in header]
            if missing:
                raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        data = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {lineno} has {len(row)} fields, "
                                  f"expected {len(header)}")
            for j, cell in enumerate(row):
                try:
                    data[j].append(float(cell))
                except ValueError:
                    raise SchemaError(f"{path}: row {lineno}, column {header[j]!r}: "
                                      f"not a number: {cell!r}") from None
    return {h: np.asarray(d, dtype=float) for h, d in zip(header, data)}


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, allow_nan=False) + "\n")


def read_json(path):
    return json.loads(Path(path).read_text())


# -- sample logs -----------------------------------------------------------------

def save_sample_log(path, log: SampleLog):
    cols = dict(zip(SampleLog.CSV_COLUMNS,
                    (log.time, log.tdu_speed, log.tdu_acceleration, log.tdu_torque,
                     log.load_cell_tension, log.elevation_angle)))
    write_columns(path, cols)


def load_sample_log(path) -> SampleLog:
    c = read_columns(path, SampleLog.CSV_COLUMNS)
    if c["t_s"].size < 2:
        raise SchemaError(f"{path}: need at least two samples")
    try:
        return SampleLog(*(c[k] for k in SampleLog.CSV_COLUMNS))
    except ValueError as exc:
        raise SchemaError(f"{path}: {exc}") from None


# -- trial logs ------------------------------------------------------------------

_TRIAL_FIELDS = ("time", "repetition", "raising", "normalized_time", "theta_ref",
                 "theta_dot_ref", "theta", "theta_dot", "theta_dot_est", "desired_tension",
                 "applied_tension", "desired_torque", "applied_motor_torque",
                 "desired_shoulder_torque", "applied_shoulder_torque")


def save_trial_log(path, log: TrialLog):
    header = list(TrialLog.CSV_COLUMNS)
    arrays = [getattr(log, f) for f in _TRIAL_FIELDS]
    rows = []
    for row in zip(*(a.tolist() for a in arrays)):
        row = list(row)
        row[2] = "raising" if row[2] else "lowering"
        rows.append(row)
    write_table(path, header, rows)


def load_trial_log(path, sample_rate: float | None = None, meta=None) -> TrialLog:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != TrialLog.CSV_COLUMNS:
            raise SchemaError(f"{path}: header does not match the trial log layout")
        cols = [[] for _ in header]
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise SchemaError(f"{path}: row {lineno} has {len(row)} fields")
            for j, cell in enumerate(row):
                try:
                    if j == 2:
                        if cell not in ("raising", "lowering"):
                            raise ValueError
                        cols[j].append(cell == "raising")
                    else:
                        cols[j].append(int(cell) if j == 1 else float(cell))
                except ValueError:
                    raise SchemaError(f"{path}: row {lineno}, column {header[j]!r}: "
                                      f"bad value {cell!r}") from None
    arrays = {f: np.asarray(c) for f, c in zip(_TRIAL_FIELDS, cols)}
    arrays["raising"] = arrays["raising"].astype(bool)
    if sample_rate is None:
        t = arrays["time"]
        sample_rate = (t.size - 1) / (t[-1] - t[0]) if t.size > 1 else math.nan
    return TrialLog(**arrays, sample_rate=float(sample_rate), meta=dict(meta or {}))


# -- recordings ------------------------------------------------------------------

def load_recordings(path):
    """Multichannel recording: first column time (s), the rest channels.

    Returns ``(time, channel_names, data)`` with ``data`` shaped
    ``(channels, samples)``.
    """
    path = Path(path)
    with path.open(newline="") as fh:
        header = next(csv.reader(fh), None)
    if not header or len(header) < 2:
        raise SchemaError(f"{path}: need a time column and at least one channel")
    cols = read_columns(path)
    t = cols[header[0]]
    if t.size < 2 or np.any(np.diff(t) <= 0):
        raise SchemaError(f"{path}: column {header[0]!r} must be strictly increasing")
    return t, header[1:], np.vstack([cols[h] for h in header[1:]])
