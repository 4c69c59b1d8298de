"""Arm pendulum, tendon driver unit losses and stiction.

None of this is part of the controller's model: it is the simulated
hardware the controller is tested against.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from ..controller import GRAVITY

MAX_DT = 5e-3


@dataclass(frozen=True)
class ArmPlant:
    """Single-DOF shoulder elevation with a cable acting at ``moment_arm``.

    ``theta`` is 0 with the arm hanging and pi/2 with the arm horizontal.
    """

    inertia: float = 0.08
    arm_mass: float = 2.1
    arm_com_length: float = 0.13
    load_mass: float = 0.5
    load_lever: float = 0.30
    viscous_damping: float = 0.02
    moment_arm: float = 0.11
    theta: float = math.radians(20.0)
    theta_dot: float = 0.0
    theta_min: float = 0.0
    theta_max: float = math.pi

    def __post_init__(self):
        if not self.inertia > 0:
            raise ValueError("inertia must be positive")
        if not self.moment_arm > 0:
            raise ValueError("moment_arm must be positive")
        if self.viscous_damping < 0:
            raise ValueError("viscous_damping must be non-negative")
        if not -math.pi <= self.theta_min < self.theta_max <= math.pi:
            raise ValueError("joint limits must satisfy -pi <= theta_min < theta_max <= pi")
        if not self.theta_min <= self.theta <= self.theta_max:
            raise ValueError("theta outside the joint limits")

    @property
    def gravity_moment(self) -> float:
        """``g * (m_a * l_com + m_l * l_l)``, the gravity torque with the arm horizontal."""
        return GRAVITY * (self.arm_mass * self.arm_com_length + self.load_mass * self.load_lever)

    def gravity_torque(self, theta=None) -> float:
        th = self.theta if theta is None else theta
        return self.gravity_moment * math.sin(th)

    def energy(self) -> float:
        """Kinetic plus potential energy, zero potential with the arm hanging."""
        return 0.5 * self.inertia * self.theta_dot ** 2 + self.gravity_moment * (1.0 - math.cos(self.theta))

    def at(self, theta: float, theta_dot: float = 0.0) -> "ArmPlant":
        return replace(self, theta=theta, theta_dot=theta_dot)


def apply_limits(theta, theta_dot, lo, hi):
    """Inelastic joint stops: clamp the angle and kill velocity into the stop."""
    if theta < lo:
        return lo, max(theta_dot, 0.0)
    if theta > hi:
        return hi, min(theta_dot, 0.0)
    return theta, theta_dot


def step_dynamics(plant: ArmPlant, cable_tension: float, dt: float,
                  external_torque: float = 0.0) -> ArmPlant:
    """Advance the arm by one semi-implicit Euler step.

    Velocity is updated first from the current angle, then the angle from
    the new velocity; the joint stops act as an impulsive constraint.
    """
    if not 0.0 < dt <= MAX_DT:
        raise ValueError(f"dt must lie in (0, {MAX_DT}] s, got {dt}")
    torque = (cable_tension * plant.moment_arm - plant.gravity_torque()
              - plant.viscous_damping * plant.theta_dot + external_torque)
    theta_dot = plant.theta_dot + dt * torque / plant.inertia
    theta = plant.theta + dt * theta_dot
    theta, theta_dot = apply_limits(theta, theta_dot, plant.theta_min, plant.theta_max)
    return replace(plant, theta=theta, theta_dot=theta_dot)


def synchronized_energy(prev: ArmPlant, cur: ArmPlant) -> float:
    """Energy with position and velocity taken at the same instant.

    Semi-implicit Euler stores the velocity half a step ahead of the angle;
    averaging the velocities around ``prev.theta`` removes that offset.
    """
    v = 0.5 * (prev.theta_dot + cur.theta_dot)
    return 0.5 * prev.inertia * v * v + prev.gravity_moment * (1.0 - math.cos(prev.theta))


@dataclass(frozen=True)
class StictionModel:
    """Breakaway friction of the motor and transmission at low speed.

    Torques are at the motor output shaft, velocities in rad/s of the pulley.
    Beyond the deadband the friction is an excess over the sliding model
    that decays exponentially with speed.
    """

    breakaway_torque: float = 0.20
    velocity_deadband: float = 0.05
    stribeck_decay: float = 0.5

    def __post_init__(self):
        if self.breakaway_torque < 0:
            raise ValueError("breakaway_torque must be non-negative")
        if not self.velocity_deadband > 0:
            raise ValueError("velocity_deadband must be positive")
        if not self.stribeck_decay > 0:
            raise ValueError("stribeck_decay must be positive")


def stiction_friction(driving_torque: float, velocity: float, model: StictionModel) -> float:
    """Friction torque opposing the pulley; see :func:`apply_stiction`."""
    fb = model.breakaway_torque
    av = abs(velocity)
    if av >= model.velocity_deadband:
        sgn = 1.0 if velocity > 0 else -1.0
        return sgn * fb * math.exp(-(av - model.velocity_deadband) / model.stribeck_decay)
    held = min(max(driving_torque, -fb), fb)
    alpha = av / model.velocity_deadband
    sgn = 1.0 if velocity > 0 else (-1.0 if velocity < 0 else 0.0)
    return (1.0 - alpha) * held + alpha * sgn * fb


def apply_stiction(commanded_torque: float, velocity: float, model: StictionModel) -> float:
    """Torque left to move the drive after stiction.

    At rest the friction holds anything up to the breakaway torque.  Inside
    the deadband the friction blends linearly from that holding value to the
    full breakaway torque against the motion, and outside it the excess
    decays with speed, so the result is continuous in ``velocity``.
    """
    return commanded_torque - stiction_friction(commanded_torque, velocity, model)


def kinetic_friction(velocity: float, model: StictionModel) -> float:
    """Friction for a speed-controlled drive, where no holding torque is defined."""
    fb = model.breakaway_torque
    av = abs(velocity)
    if av == 0.0:
        return 0.0
    sgn = 1.0 if velocity > 0 else -1.0
    if av < model.velocity_deadband:
        return sgn * fb * av / model.velocity_deadband
    return sgn * fb * math.exp(-(av - model.velocity_deadband) / model.stribeck_decay)


def kinetic_friction_array(velocity, model: StictionModel):
    """Vectorised :func:`kinetic_friction`."""
    v = np.asarray(velocity, dtype=float)
    av = np.abs(v)
    db = model.velocity_deadband
    inside = model.breakaway_torque * av / db
    outside = model.breakaway_torque * np.exp(-(np.maximum(av, db) - db) / model.stribeck_decay)
    return np.sign(v) * np.where(av < db, inside, outside)


@dataclass(frozen=True)
class TDUModel:
    """Losses of the tendon driver unit that the controller does not model.

    ``rotor_inertia`` is reflected to the output shaft; ``viscous_friction``
    is in Nm per rad/s of the pulley.  ``sheath_deadband`` (m/s) smooths the
    friction direction of the sheath around zero cable speed.
    """

    rotor_inertia: float = 4e-3
    viscous_friction: float = 0.02
    max_torque: float = 9.0
    stiction: StictionModel | None = StictionModel()
    sheath_deadband: float = 1e-3

    def __post_init__(self):
        if self.rotor_inertia < 0 or self.viscous_friction < 0:
            raise ValueError("rotor_inertia and viscous_friction must be non-negative")
        if not self.max_torque > 0:
            raise ValueError("max_torque must be positive")
        if not self.sheath_deadband > 0:
            raise ValueError("sheath_deadband must be positive")

    @classmethod
    def ideal(cls, max_torque: float = 9.0) -> "TDUModel":
        """Lossless drive that matches the controller's assumptions."""
        return cls(rotor_inertia=0.0, viscous_friction=0.0, max_torque=max_torque,
                   stiction=None, sheath_deadband=1e-4)


def sheath_direction(cable_velocity: float, deadband: float) -> float:
    """Friction direction in [-1, 1], linear inside ``deadband``."""
    return min(1.0, max(-1.0, cable_velocity / deadband))
