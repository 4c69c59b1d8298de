"""Outcome measures for trial logs and EMG recordings.

Tracking errors (plain and percentage RMSE, split by movement phase),
spectral arc length smoothness, EMG envelopes and their phase means, and
the resampling of repetitions onto a normalised time axis.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .identification import zero_phase_filter


class InsufficientDataError(ValueError):
    """Raised when a metric has no samples (or repetitions) left to work on."""


def _pair(reference, measured):
    ref = np.asarray(reference, dtype=float)
    meas = np.asarray(measured, dtype=float)
    if ref.shape != meas.shape:
        raise ValueError(f"length mismatch: {ref.shape} vs {meas.shape}")
    if ref.size == 0:
        raise InsufficientDataError("empty series")
    return ref, meas


def rmse(reference, measured) -> float:
    ref, meas = _pair(reference, measured)
    d = meas - ref
    return math.sqrt(float(np.mean(d * d)))


def percentage_error_rmse(reference, measured, epsilon: float = 1e-6,
                          return_excluded: bool = False):
    """RMSE of ``100 * (measured - reference) / reference``.

    Samples with ``|reference| < epsilon`` are skipped.  With
    ``return_excluded`` the number of skipped samples is returned as well.
    """
    ref, meas = _pair(reference, measured)
    keep = np.abs(ref) >= epsilon
    n_excluded = int(ref.size - np.count_nonzero(keep))
    if not np.any(keep):
        raise InsufficientDataError("every sample has a reference below epsilon")
    pct = 100.0 * (meas[keep] - ref[keep]) / ref[keep]
    value = math.sqrt(float(np.mean(pct * pct)))
    return (value, n_excluded) if return_excluded else value


@dataclass(frozen=True)
class PhaseSplitStat:
    entire: float
    raising: float
    lowering: float

    def as_dict(self, prefix: str = "") -> dict:
        return {f"{prefix}entire": self.entire, f"{prefix}raising": self.raising,
                f"{prefix}lowering": self.lowering}


def phase_rmse(reference, measured, raising, func=rmse) -> PhaseSplitStat:
    """``func`` over all samples and over each phase of the boolean ``raising`` mask."""
    ref, meas = _pair(reference, measured)
    up = np.asarray(raising, dtype=bool)
    if up.shape != ref.shape:
        raise ValueError("phase mask must match the series length")
    if up.all() or not up.any():
        raise InsufficientDataError("both phases need at least one sample")
    return PhaseSplitStat(func(ref, meas), func(ref[up], meas[up]), func(ref[~up], meas[~up]))


# -- smoothness ------------------------------------------------------------------

def sparc(speed, sample_rate: float, freq_cutoff: float = 10.0, amp_threshold: float = 0.05,
          pad_level: int = 4) -> float:
    """Spectral arc length of a speed profile (always negative).

    The magnitude spectrum is zero padded to ``2**(ceil(log2 n) + pad_level)``
    points, normalised to its peak, truncated at ``freq_cutoff`` and then to
    the last bin above ``amp_threshold``; the result is minus the arc length
    of that curve with frequency rescaled to [0, 1].
    """
    v = np.asarray(speed, dtype=float)
    if v.ndim != 1 or v.size < 2:
        raise ValueError("speed must be a 1-D series of at least two samples")
    if not np.any(v != 0.0):
        raise ValueError("speed profile is identically zero")
    nfft = int(2 ** (math.ceil(math.log2(v.size)) + pad_level))
    freq = np.arange(nfft // 2 + 1) * sample_rate / nfft
    mag = np.abs(np.fft.rfft(v, nfft))
    mag /= mag.max()

    sel = freq <= freq_cutoff
    freq, mag = freq[sel], mag[sel]
    above = np.flatnonzero(mag >= amp_threshold)
    freq = freq[above[0]:above[-1] + 1]
    mag = mag[above[0]:above[-1] + 1]
    if freq.size < 2:
        return 0.0
    df = np.diff(freq) / (freq[-1] - freq[0])
    return -float(np.sum(np.sqrt(df * df + np.diff(mag) ** 2)))


# -- EMG -------------------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeConfig:
    bandpass_low: float = 20.0
    bandpass_high: float = 400.0
    filter_order: int = 3
    rms_window: float = 0.100

    def __post_init__(self):
        if not 0.0 < self.bandpass_low < self.bandpass_high:
            raise ValueError("band edges must satisfy 0 < low < high")
        if self.filter_order < 1:
            raise ValueError("filter_order must be >= 1")
        if not self.rms_window > 0:
            raise ValueError("rms_window must be positive")

    def check(self, sample_rate: float):
        if self.bandpass_high >= 0.5 * sample_rate:
            raise ValueError(f"band-pass upper edge {self.bandpass_high} Hz is not below "
                             f"Nyquist ({0.5 * sample_rate} Hz)")


def sliding_rms(x, window: int):
    """Centred moving RMS; the window shrinks at the edges instead of padding."""
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if window < 1:
        raise ValueError("window must be at least one sample")
    c = np.concatenate([np.zeros(x.shape[:-1] + (1,)), np.cumsum(x * x, axis=-1)], axis=-1)
    half_lo = (window - 1) // 2
    half_hi = window - 1 - half_lo
    idx = np.arange(n)
    lo = np.maximum(idx - half_lo, 0)
    hi = np.minimum(idx + half_hi + 1, n)
    ms = (c[..., hi] - c[..., lo]) / (hi - lo)
    return np.sqrt(np.maximum(ms, 0.0))


def emg_envelope(raw, sample_rate: float, cfg: EnvelopeConfig = EnvelopeConfig()):
    """Band-pass (zero phase), full-wave rectify, then centred sliding RMS.

    Works along the last axis, so a (channels, samples) array is fine.
    """
    cfg.check(sample_rate)
    x = np.asarray(raw, dtype=float)
    if not np.any(x):
        return np.zeros_like(x)
    band = zero_phase_filter(x, (cfg.bandpass_low, cfg.bandpass_high), cfg.filter_order,
                             sample_rate, "bandpass")
    window = max(1, int(round(cfg.rms_window * sample_rate)))
    return sliding_rms(np.abs(band), window)


def iemg(envelope, boundaries) -> PhaseSplitStat:
    """Mean envelope over each phase, i.e. its integral on a unit time axis.

    ``boundaries`` is ``(start, switch, stop)`` in samples: raising covers
    ``[start, switch)`` and lowering ``[switch, stop)``.
    """
    env = np.asarray(envelope, dtype=float)
    start, switch, stop = (int(b) for b in boundaries)
    if not 0 <= start <= switch <= stop <= env.shape[-1]:
        raise ValueError(f"boundaries {boundaries} out of order or out of range")
    if switch == start or stop == switch:
        raise InsufficientDataError("empty phase")
    if np.any(env[..., start:stop] < 0):
        raise ValueError("envelope must be non-negative")
    return PhaseSplitStat(float(np.mean(env[..., start:stop])),
                          float(np.mean(env[..., start:switch])),
                          float(np.mean(env[..., switch:stop])))


def normalization_scale(envelopes) -> float:
    """Average of the per-repetition envelope peaks (of the no-suit condition)."""
    peaks = [float(np.max(e)) for e in envelopes]
    if not peaks:
        raise InsufficientDataError("no repetitions to normalise against")
    scale = float(np.mean(peaks))
    if scale <= 0:
        raise ValueError("reference envelopes are all zero")
    return scale


# -- repetition averaging --------------------------------------------------------

@dataclass(frozen=True)
class NormalizedAverage:
    normalized_time: np.ndarray
    mean: np.ndarray
    sd: np.ndarray
    count: int

    def peak_location(self) -> float:
        """Normalised time of the largest absolute mean value."""
        return float(self.normalized_time[int(np.argmax(np.abs(self.mean)))])


def normalize_and_average(repetitions, drop_first: bool = True, n_points: int = 1001,
                          times=None) -> NormalizedAverage:
    """Resample each repetition linearly onto ``n_points`` in [0, 1] and average.

    Repetitions are taken as uniformly sampled unless ``times`` supplies one
    time vector per repetition.  The standard deviation uses ``ddof=1``.
    """
    reps = [np.asarray(r, dtype=float) for r in repetitions]
    if times is not None:
        times = [np.asarray(t, dtype=float) for t in times]
        if len(times) != len(reps):
            raise ValueError("need one time vector per repetition")
    if drop_first:
        reps = reps[1:]
        times = times[1:] if times is not None else None
    if len(reps) < 2:
        raise InsufficientDataError(f"need at least 2 repetitions, have {len(reps)}")
    grid = np.linspace(0.0, 1.0, n_points)
    rows = []
    for i, r in enumerate(reps):
        if r.size < 2:
            raise InsufficientDataError(f"repetition {i} has fewer than 2 samples")
        if times is None:
            s = np.linspace(0.0, 1.0, r.size)
        else:
            t = times[i]
            s = (t - t[0]) / (t[-1] - t[0])
        rows.append(np.interp(grid, s, r))
    stack = np.vstack(rows)
    return NormalizedAverage(grid, stack.mean(axis=0), stack.std(axis=0, ddof=1), len(reps))


# -- trial summary ---------------------------------------------------------------

@dataclass(frozen=True)
class SparcConfig:
    freq_cutoff: float = 10.0
    amp_threshold: float = 0.05
    pad_level: int = 4


def trial_metrics(log, drop_first: bool = True, sparc_cfg: SparcConfig = SparcConfig(),
                  n_points: int = 1001) -> dict:
    """Table-style summary of one condition.

    ``log`` is a :class:`~exotension.plantsim.TrialLog`.  Tension and
    shoulder-torque RMSE are split by phase, the angle RMSE is in degrees and
    SPARC is the mean over repetitions of the elevation speed magnitude.
    """
    reps = np.unique(log.repetition)
    if drop_first:
        if reps.size < 2:
            raise InsufficientDataError("cannot drop the only repetition")
        log = log.select(log.repetition != reps[0])
        reps = reps[1:]
    tension = phase_rmse(log.desired_tension, log.applied_tension, log.raising)
    torque = phase_rmse(log.desired_shoulder_torque, log.applied_shoulder_torque, log.raising)
    pct_t = percentage_error_rmse(log.desired_tension, log.applied_tension)
    pct_q = percentage_error_rmse(log.desired_shoulder_torque, log.applied_shoulder_torque)
    smooth = [sparc(np.abs(log.theta_dot[log.repetition == k]), log.sample_rate,
                    sparc_cfg.freq_cutoff, sparc_cfg.amp_threshold, sparc_cfg.pad_level)
              for k in reps]
    err = [log.tension_error[log.repetition == k] for k in reps]
    nt = [log.normalized_time[log.repetition == k] for k in reps]
    peak = None
    if len(err) >= 2:
        # every repetition spans [0, 1) of its own cycle
        grid = np.linspace(0.0, 1.0, n_points)
        stack = np.vstack([np.interp(grid, s, e) for s, e in zip(nt, err)])
        peak = float(grid[int(np.argmax(np.abs(stack.mean(axis=0))))])
    row = {}
    row.update(tension.as_dict("tension_rmse_"))
    row.update(torque.as_dict("torque_rmse_"))
    row["angle_rmse_deg"] = math.degrees(rmse(log.theta_ref, log.theta))
    row["sparc"] = float(np.mean(smooth))
    row["tension_pct_rmse"] = pct_t
    row["torque_pct_rmse"] = pct_q
    row["peak_error_normalized_time"] = peak
    return row
