"""Minimum-jerk reference trajectories."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# peak of d/ds (10 s^3 - 15 s^4 + 6 s^5), reached at s = 1/2
PEAK_SPEED_FACTOR = 1.875


def min_jerk_duration(theta_start: float, theta_end: float, peak_speed: float) -> float:
    """Movement time whose minimum-jerk profile peaks at ``peak_speed``."""
    disp = theta_end - theta_start
    if disp == 0:
        raise ValueError("minimum-jerk movement needs a non-zero displacement")
    if not peak_speed > 0:
        raise ValueError("peak_speed must be positive")
    return PEAK_SPEED_FACTOR * abs(disp) / peak_speed


def min_jerk_profile(s, theta_start: float, theta_end: float, duration: float):
    """Position, velocity and acceleration at normalised times ``s`` in [0, 1]."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    disp = theta_end - theta_start
    s2 = s * s
    s3 = s2 * s
    pos = theta_start + disp * (10.0 * s3 - 15.0 * s3 * s + 6.0 * s3 * s2)
    vel = disp / duration * (30.0 * s2 - 60.0 * s3 + 30.0 * s2 * s2)
    acc = disp / duration ** 2 * (60.0 * s - 180.0 * s2 + 120.0 * s3)
    return pos, vel, acc


@dataclass(frozen=True)
class Reference:
    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    duration: float


def min_jerk_trajectory(theta_start: float, theta_end: float, peak_speed: float,
                        sample_rate: float) -> Reference:
    """Sampled point-to-point movement; the last sample lands on ``duration``
    only when it is a multiple of the sample period."""
    duration = min_jerk_duration(theta_start, theta_end, peak_speed)
    n = int(np.floor(duration * sample_rate + 1e-9)) + 1
    t = np.arange(n) / sample_rate
    pos, vel, acc = min_jerk_profile(t / duration, theta_start, theta_end, duration)
    return Reference(t, pos, vel, acc, duration)


@dataclass(frozen=True)
class CyclicReference:
    """Back-to-back raise/lower repetitions on a uniform grid."""

    time: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    repetition: np.ndarray
    raising: np.ndarray
    normalized_time: np.ndarray
    half_period: float


def raise_lower_cycles(theta_low: float, theta_high: float, peak_speed: float,
                       repetitions: int, sample_rate: float) -> CyclicReference:
    """Repetitions of a minimum-jerk raise followed by a minimum-jerk lowering.

    Samples with reference time inside ``[0, T)`` of a cycle are tagged as
    raising and those in ``[T, 2T)`` as lowering, so the tag switches at the
    zero crossings of the reference velocity and the phases tile each cycle.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    half = min_jerk_duration(theta_low, theta_high, peak_speed)
    period = 2.0 * half
    n = int(round(repetitions * period * sample_rate))
    t = np.arange(n) / sample_rate
    rep = np.minimum((t // period).astype(int), repetitions - 1)
    local = t - rep * period
    raising = local < half
    s = np.where(raising, local / half, (local - half) / half)
    pos_up, vel_up, acc_up = min_jerk_profile(s, theta_low, theta_high, half)
    pos_dn, vel_dn, acc_dn = min_jerk_profile(s, theta_high, theta_low, half)
    pos = np.where(raising, pos_up, pos_dn)
    vel = np.where(raising, vel_up, vel_dn)
    acc = np.where(raising, acc_up, acc_dn)
    return CyclicReference(t, pos, vel, acc, rep, raising, local / period, half)
