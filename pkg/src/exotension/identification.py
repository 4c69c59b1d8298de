"""Identification of the inverse transmission model from mannequin logs.

Pipeline: zero-phase low-pass filtering of the logged channels, selection of
steady-state samples, and one robust straight-line fit per movement
direction relating output tension (x) to motor torque (y).
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, fields

import numpy as np
from scipy import signal

from .controller import DirectionalRegression

logger = logging.getLogger(__name__)

RAISING = "raising"
LOWERING = "lowering"


class EmptySelectionError(RuntimeError):
    """No sample survived the steady-state selection for some direction."""

    def __init__(self, directions):
        self.directions = tuple(directions)
        super().__init__("no steady-state samples for: " + ", ".join(self.directions))


class ConvergenceError(RuntimeError):
    """IRLS did not converge; ``result`` holds the last iterate."""

    def __init__(self, msg, result):
        super().__init__(msg)
        self.result = result


# -- filtering ---------------------------------------------------------------

def _check_band(freqs, sample_rate):
    nyq = 0.5 * sample_rate
    for f in np.atleast_1d(freqs):
        if not 0.0 < f < nyq:
            raise ValueError(f"cutoff {f} Hz must lie in (0, Nyquist={nyq} Hz)")


def zero_phase_filter(x, cutoff, order: int, sample_rate: float, btype: str = "lowpass"):
    """Forward-backward Butterworth filtering along the last axis.

    ``cutoff`` is a scalar for low/high-pass and a pair for band-pass.  The
    signal is extended by odd reflection over ``3 * len(a)`` samples at each
    end before filtering (``3 * (order + 1)`` for a low-pass).
    """
    _check_band(cutoff, sample_rate)
    b, a = signal.butter(order, cutoff, btype=btype, fs=sample_rate)
    x = np.asarray(x, dtype=float)
    padlen = 3 * len(a)
    if x.shape[-1] <= padlen:
        raise ValueError(f"signal too short for zero-phase filtering: need more than "
                         f"{padlen} samples, got {x.shape[-1]}")
    return signal.filtfilt(b, a, x, axis=-1, padtype="odd", padlen=padlen)


def zero_phase_lowpass(x, cutoff: float, order: int, sample_rate: float):
    return zero_phase_filter(x, cutoff, order, sample_rate, "lowpass")


# -- data containers ---------------------------------------------------------

@dataclass
class SampleLog:
    """Channels logged on the mannequin bench, SI units throughout."""

    time: np.ndarray
    tdu_speed: np.ndarray
    tdu_acceleration: np.ndarray
    tdu_torque: np.ndarray
    load_cell_tension: np.ndarray
    elevation_angle: np.ndarray
    sample_rate: float = field(default=None)

    CSV_COLUMNS = ("t_s", "tdu_speed_rad_s", "tdu_acc_rad_s2", "tdu_torque_nm",
                   "tension_n", "theta_aoe_rad")

    def __post_init__(self):
        for f in fields(self):
            if f.name != "sample_rate":
                setattr(self, f.name, np.asarray(getattr(self, f.name), dtype=float))
        n = self.time.size
        if any(getattr(self, f.name).shape != (n,) for f in fields(self)
               if f.name != "sample_rate"):
            raise ValueError("all SampleLog channels must be 1-D with equal length")
        if n < 2:
            raise ValueError("SampleLog needs at least 2 samples")
        dt = np.diff(self.time)
        if np.any(dt <= 0):
            raise ValueError("time must be strictly increasing")
        mean_dt = (self.time[-1] - self.time[0]) / (n - 1)
        if np.max(np.abs(dt - mean_dt)) > 1e-6 * mean_dt + 1e-12 * abs(self.time[-1]):
            raise ValueError("SampleLog must be uniformly sampled")
        if self.sample_rate is None:
            self.sample_rate = 1.0 / mean_dt

    def __len__(self):
        return self.time.size

    def columns(self):
        return (self.time, self.tdu_speed, self.tdu_acceleration, self.tdu_torque,
                self.load_cell_tension, self.elevation_angle)

    def filtered(self, cutoff: float = 5.0, order: int = 3) -> "SampleLog":
        """Low-pass the encoder, torque and load-cell channels (not time or angle)."""
        lp = lambda x: zero_phase_lowpass(x, cutoff, order, self.sample_rate)  # noqa: E731
        return SampleLog(self.time, lp(self.tdu_speed), lp(self.tdu_acceleration),
                         lp(self.tdu_torque), lp(self.load_cell_tension),
                         self.elevation_angle, self.sample_rate)


@dataclass(frozen=True)
class SteadyStateCriteria:
    """Thresholds for steady-state samples; speeds and angles in degrees."""

    min_speed: float = 15.0          # deg/s
    max_acceleration: float = 15.0   # deg/s^2
    angle_min: float = 20.0          # deg
    angle_max: float = 90.0          # deg
    min_torque: float = 0.0          # Nm

    def __post_init__(self):
        if not self.angle_min < self.angle_max:
            raise ValueError("angle_min must be below angle_max")
        if not self.min_speed > 0:
            raise ValueError("min_speed must be positive")

    def mask(self, log: SampleLog) -> np.ndarray:
        speed = np.degrees(np.abs(log.tdu_speed))
        acc = np.degrees(np.abs(log.tdu_acceleration))
        angle = np.degrees(log.elevation_angle)
        return ((speed > self.min_speed)
                & (acc < self.max_acceleration)
                & (angle > self.angle_min) & (angle < self.angle_max)
                & (log.tdu_torque > self.min_torque))


def select_steady_state(log: SampleLog, criteria: SteadyStateCriteria):
    """Indices of steady-state samples, split by the sign of the motor speed.

    Returns
    -------
    raising, lowering : ndarray of int

    Raises
    ------
    EmptySelectionError
        If nothing at all is selected.
    """
    keep = criteria.mask(log)
    raising = np.flatnonzero(keep & (log.tdu_speed > 0))
    lowering = np.flatnonzero(keep & (log.tdu_speed < 0))
    if raising.size == 0 and lowering.size == 0:
        raise EmptySelectionError([RAISING, LOWERING])
    return raising, lowering


# -- robust regression ---------------------------------------------------------

@dataclass(frozen=True)
class FitResult:
    slope: float
    intercept: float
    r_squared: float
    sample_count: int
    direction: str = ""
    iterations: int = 0

    def to_dict(self) -> dict:
        return {"slope": self.slope, "intercept": self.intercept,
                "r_squared": self.r_squared, "sample_count": self.sample_count,
                "direction": self.direction, "iterations": self.iterations}


def bisquare(u):
    u = np.asarray(u)
    return np.where(np.abs(u) < 1.0, (1.0 - u * u) ** 2, 0.0)


def _r_squared(x, y, slope, intercept):
    resid = y - (intercept + slope * x)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(min(1.0, max(0.0, r2)))


def robust_linear_fit(x, y, tune: float = 4.685, tol: float = 1e-8, max_iter: int = 50,
                      direction: str = "") -> FitResult:
    """Straight-line fit by iteratively reweighted least squares.

    Bisquare weights with tuning constant ``tune``; residuals are adjusted
    for leverage and scaled by ``MAD / 0.6745``.  Iteration stops once
    the fitted line moves by less than ``tol`` relative to its size
    over the range of ``x``.

    Raises
    ------
    ValueError
        Fewer than 10 points or no spread in ``x``.
    ConvergenceError
        ``max_iter`` reached; the exception carries the last iterate.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError("x and y must have equal length")
    n = x.size
    if n < 10:
        raise ValueError(f"robust fit needs at least 10 points, got {n}")
    if np.ptp(x) == 0.0:
        raise ValueError("x has no spread; slope is undetermined")

    X = np.column_stack([np.ones(n), x])
    q, _ = np.linalg.qr(X)
    leverage = np.minimum(0.9999, np.sum(q * q, axis=1))
    adjust = 1.0 / np.sqrt(1.0 - leverage)
    tiny_s = 1e-6 * np.std(y) if np.std(y) > 0 else 1e-12

    beta = np.linalg.lstsq(X, y, rcond=None)[0]
    for it in range(1, max_iter + 1):
        resid = (y - X @ beta) * adjust
        # MAD skips the p - 1 smallest residuals, which are ~0 by construction
        abs_r = np.sort(np.abs(resid))
        s = np.median(abs_r[1:]) / 0.6745
        w = bisquare(resid / (tune * max(s, tiny_s)))
        sw = np.sqrt(w)
        beta_new = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)[0]
        # movement of the fitted line over the data, relative to its size
        xmax = np.max(np.abs(x))
        change = abs(beta_new[0] - beta[0]) + abs(beta_new[1] - beta[1]) * xmax
        size = abs(beta_new[0]) + abs(beta_new[1]) * xmax
        beta = beta_new
        if change <= tol * max(size, 1e-300):
            break
    else:
        last = FitResult(float(beta[1]), float(beta[0]),
                         _r_squared(x, y, beta[1], beta[0]), n, direction, max_iter)
        raise ConvergenceError(f"IRLS did not converge in {max_iter} iterations", last)

    return FitResult(float(beta[1]), float(beta[0]), _r_squared(x, y, beta[1], beta[0]),
                     n, direction, it)


# -- full pipeline ------------------------------------------------------------

@dataclass(frozen=True)
class IdentificationResult:
    regression: DirectionalRegression
    raising: FitResult
    lowering: FitResult
    raising_idx: np.ndarray
    lowering_idx: np.ndarray
    filtered_log: SampleLog


def identify_detailed(log: SampleLog, criteria: SteadyStateCriteria = SteadyStateCriteria(),
                      cutoff: float = 5.0, order: int = 3) -> IdentificationResult:
    """Filter, select and fit; keeps the intermediate products for reporting."""
    flog = log.filtered(cutoff, order)
    raising_idx, lowering_idx = select_steady_state(flog, criteria)
    missing = [name for name, idx in ((RAISING, raising_idx), (LOWERING, lowering_idx))
               if idx.size == 0]
    if missing:
        raise EmptySelectionError(missing)

    x, y = flog.load_cell_tension, flog.tdu_torque
    fit_r = robust_linear_fit(x[raising_idx], y[raising_idx], direction=RAISING)
    fit_l = robust_linear_fit(x[lowering_idx], y[lowering_idx], direction=LOWERING)
    if math.isclose(fit_r.slope, fit_l.slope, rel_tol=0.01):
        logger.warning("raising and lowering slopes coincide (%.5g vs %.5g): "
                       "frictionless sheath?", fit_r.slope, fit_l.slope)
    reg = DirectionalRegression(
        slope_raising=fit_r.slope, intercept_raising=fit_r.intercept,
        slope_lowering=fit_l.slope, intercept_lowering=fit_l.intercept,
        r2_raising=fit_r.r_squared, r2_lowering=fit_l.r_squared,
    )
    return IdentificationResult(reg, fit_r, fit_l, raising_idx, lowering_idx, flog)


def identify(log: SampleLog, criteria: SteadyStateCriteria = SteadyStateCriteria(),
             cutoff: float = 5.0, order: int = 3) -> DirectionalRegression:
    """Identify the two inverse-model lines from a mannequin log."""
    return identify_detailed(log, criteria, cutoff, order).regression
