"""Sensorless tension controller.

The stack has three pieces: a gravity-assistance block that turns the
humeral elevation angle into a desired cable tension, the identified inverse
transmission model (one line for raising, one for lowering), and a sigmoid
that blends the two lines according to the elevation speed.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

GRAVITY = 9.81

# Lowering slope may exceed the raising slope by this fraction before the
# identified lines are rejected; covers frictionless sheaths fitted on noise.
SLOPE_ORDER_RTOL = 0.01


@dataclass(frozen=True)
class DirectionalRegression:
    """Identified inverse-model lines, ``torque = intercept + slope * tension``.

    Slopes are in Nm/N, intercepts in Nm.  The raising slope is larger
    because friction opposes the motor when the arm goes up.
    """

    slope_raising: float
    intercept_raising: float
    slope_lowering: float
    intercept_lowering: float
    r2_raising: float = 1.0
    r2_lowering: float = 1.0

    def __post_init__(self):
        if not (self.slope_raising > 0 and self.slope_lowering > 0):
            raise ValueError("regression slopes must be positive")
        if self.slope_lowering > self.slope_raising * (1.0 + SLOPE_ORDER_RTOL):
            raise ValueError(
                f"lowering slope {self.slope_lowering:.6g} exceeds raising slope "
                f"{self.slope_raising:.6g}; friction cannot aid raising")
        for name in ("r2_raising", "r2_lowering"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    def raising_torque(self, tension):
        return self.intercept_raising + self.slope_raising * tension

    def lowering_torque(self, tension):
        return self.intercept_lowering + self.slope_lowering * tension

    @classmethod
    def from_model(cls, model) -> "DirectionalRegression":
        """Exact inverse of a :class:`~exotension.transmission.BowdenModel`."""
        return cls(
            slope_raising=model.pulley_radius / model.raising_gain,
            intercept_raising=0.0,
            slope_lowering=model.pulley_radius / model.lowering_gain,
            intercept_lowering=0.0,
        )

    def to_dict(self) -> dict:
        return {
            "m_raise": self.slope_raising,
            "b_raise": self.intercept_raising,
            "m_lower": self.slope_lowering,
            "b_lower": self.intercept_lowering,
            "r2_raise": self.r2_raising,
            "r2_lower": self.r2_lowering,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DirectionalRegression":
        return cls(
            slope_raising=float(d["m_raise"]),
            intercept_raising=float(d["b_raise"]),
            slope_lowering=float(d["m_lower"]),
            intercept_lowering=float(d["b_lower"]),
            r2_raising=float(d.get("r2_raise", 1.0)),
            r2_lowering=float(d.get("r2_lower", 1.0)),
        )


@dataclass(frozen=True)
class SigmoidBlend:
    """Shape of the raising/lowering blend.

    ``weight(v) = 1 / (1 + exp(-steepness * (v - midpoint)))`` is the share
    of the raising line; it reaches 0.01 at ``v001`` and 0.99 at ``v099``.
    """

    midpoint: float
    steepness: float
    v001: float
    v099: float

    def weight(self, elevation_speed):
        z = -self.steepness * (np.asarray(elevation_speed, dtype=float) - self.midpoint)
        # exp overflow for very negative speeds only drives the weight to 0
        with np.errstate(over="ignore"):
            w = 1.0 / (1.0 + np.exp(z))
        return w if w.ndim else float(w)


def sigmoid_params(v001: float, v099: float) -> SigmoidBlend:
    """Build the blend from the speeds giving 1 % and 99 % raising weight.

    The steepness is taken positive so that fast raising selects the raising
    line; with ``v001 < v099`` this is ``ln(99) / (v099 - midpoint)``.
    """
    if not v001 < v099:
        raise ValueError(f"v001 ({v001}) must be below v099 ({v099})")
    midpoint = 0.5 * (v001 + v099)
    steepness = math.log(99.0) / (v099 - midpoint)
    return SigmoidBlend(midpoint=midpoint, steepness=steepness, v001=v001, v099=v099)


def blend_torque(t_raising, t_lowering, elevation_speed, blend: SigmoidBlend):
    """Mix the two directional torques with the sigmoid weight."""
    w = blend.weight(elevation_speed)
    return t_lowering + (t_raising - t_lowering) * w


def desired_motor_torque(desired_tension, elevation_speed, reg: DirectionalRegression,
                         blend: SigmoidBlend):
    """Motor torque command for a desired output tension.

    Works elementwise on arrays as well as on scalars.
    """
    if np.any(np.asarray(desired_tension) < 0):
        raise ValueError("desired tension must be non-negative")
    return blend_torque(reg.raising_torque(desired_tension),
                        reg.lowering_torque(desired_tension),
                        elevation_speed, blend)


@dataclass(frozen=True)
class GravityAssist:
    """Gravity-assistance parameters.

    The desired tension is the requested share of the static gravitational
    shoulder torque divided by a constant cable moment arm, floored at the
    pretension that keeps the cable taut.
    """

    support_fraction: float = 0.5
    arm_mass: float = 2.1
    arm_com_length: float = 0.13
    load_mass: float = 0.5
    load_lever: float = 0.30
    moment_arm: float = 0.11
    pretension: float = 10.0

    def __post_init__(self):
        if not 0.0 <= self.support_fraction <= 1.0:
            raise ValueError("support_fraction must lie in [0, 1]")
        if self.moment_arm <= 0:
            raise ValueError("moment_arm must be positive")
        if self.pretension < 0:
            raise ValueError("pretension must be non-negative")
        if min(self.arm_mass, self.arm_com_length, self.load_mass, self.load_lever) < 0:
            raise ValueError("anthropometric parameters must be non-negative")

    @property
    def gravity_moment(self) -> float:
        """Peak gravitational shoulder torque (arm horizontal), Nm."""
        return GRAVITY * (self.arm_mass * self.arm_com_length
                          + self.load_mass * self.load_lever)


def gravity_tension_reference(theta, assist: GravityAssist):
    """Desired cable tension for a humeral elevation angle in radians."""
    th = np.asarray(theta, dtype=float)
    if np.any(th < 0.0) or np.any(th > math.pi) or np.any(np.isnan(th)):
        raise ValueError("elevation angle must lie in [0, pi] rad")
    t = assist.support_fraction * assist.gravity_moment * np.sin(th) / assist.moment_arm
    t = np.maximum(assist.pretension, t)
    return t if t.ndim else float(t)


def shoulder_torque_from_tension(tension, moment_arm: float):
    if moment_arm <= 0:
        raise ValueError("moment_arm must be positive")
    if np.any(np.asarray(tension) < 0):
        raise ValueError("tension must be non-negative")
    return np.asarray(tension) * moment_arm if np.ndim(tension) else tension * moment_arm


class VelocityEstimator:
    """Causal elevation-speed estimate from sampled angles.

    A backward difference is passed through a first-order low-pass, so each
    output only depends on past samples.  One instance belongs to one
    control loop.
    """

    def __init__(self, dt: float, cutoff_hz: float = 5.0):
        if dt <= 0:
            raise ValueError("dt must be positive")
        if cutoff_hz <= 0:
            raise ValueError("cutoff must be positive")
        self.dt = dt
        self.cutoff_hz = cutoff_hz
        tau = 1.0 / (2.0 * math.pi * cutoff_hz)
        self.alpha = dt / (tau + dt)
        self.reset()

    def reset(self):
        self._prev = None
        self.value = 0.0

    def update(self, angle: float) -> float:
        if self._prev is not None:
            d = (angle - self._prev) / self.dt
            self.value += self.alpha * (d - self.value)
        self._prev = angle
        return self.value


def estimate_elevation_speed(angle_samples, dt: float, cutoff_hz: float = 5.0) -> np.ndarray:
    """Run :class:`VelocityEstimator` over a whole series; first output is 0."""
    x = np.asarray(angle_samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need at least 2 angle samples")
    est = VelocityEstimator(dt, cutoff_hz)
    return np.array([est.update(a) for a in x])


@dataclass(frozen=True)
class TensionController:
    """Gravity assistance, inverse model and blend bundled together."""

    regression: DirectionalRegression
    blend: SigmoidBlend
    assist: GravityAssist
    velocity_cutoff_hz: float = 5.0

    def desired_tension(self, theta):
        return gravity_tension_reference(theta, self.assist)

    def command(self, theta, elevation_speed):
        return desired_motor_torque(self.desired_tension(theta), elevation_speed,
                                    self.regression, self.blend)
