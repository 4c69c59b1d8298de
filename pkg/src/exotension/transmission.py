"""Forward model of the tendon driver unit and Bowden-sheath transmission.

Motor torque is converted to input tension at the pulley, and the sheath
removes (raising) or adds (lowering) a Coulomb friction force whose size
depends on the wrap angle of the sheath.  Inertia is neglected.

Sign convention: positive cable velocity means the cable travels towards
the motor, i.e. the arm is being raised.
"""
from __future__ import annotations

import math
from dataclasses import dataclass


class StictionRegimeError(ValueError):
    """Raised when the sliding friction model is evaluated at zero velocity."""


@dataclass(frozen=True)
class BowdenModel:
    """Physical parameters of the cable transmission.

    Parameters
    ----------
    mu : float
        Coulomb friction coefficient between cable and sheath.
    phi : float
        Total wrap angle of the sheath in radians.
    pulley_radius : float
        Radius of the motor pulley in meters.
    """

    mu: float
    phi: float
    pulley_radius: float

    def __post_init__(self):
        if not (self.mu >= 0.0 and math.isfinite(self.mu)):
            raise ValueError(f"mu must be finite and >= 0, got {self.mu}")
        if not 0.0 <= self.phi <= 2.0 * math.pi:
            raise ValueError(f"phi must lie in [0, 2*pi], got {self.phi}")
        if not self.pulley_radius > 0.0:
            raise ValueError(f"pulley_radius must be > 0, got {self.pulley_radius}")
        if self.mu * math.sin(self.phi / 2.0) >= 1.0:
            raise ValueError("mu * sin(phi / 2) must be < 1 for a finite lowering gain")

    @property
    def friction_term(self) -> float:
        """``mu * sin(phi / 2)``, the only combination of mu and phi that matters."""
        return self.mu * math.sin(self.phi / 2.0)

    def gain(self, direction: float) -> float:
        """Ratio ``T_out / T_in`` for a friction direction in [-1, 1].

        ``direction`` is normally ``sgn(V_cable)``; fractional values are
        accepted so the plant simulator can regularise the sign near zero.
        """
        a = self.friction_term
        return 1.0 - direction * 2.0 * a / (1.0 + direction * a)

    @property
    def raising_gain(self) -> float:
        return self.gain(1.0)

    @property
    def lowering_gain(self) -> float:
        return self.gain(-1.0)

    def to_dict(self) -> dict:
        return {"mu": self.mu, "phi_rad": self.phi, "pulley_radius_m": self.pulley_radius}

    @classmethod
    def from_dict(cls, d: dict) -> "BowdenModel":
        return cls(mu=float(d["mu"]), phi=float(d["phi_rad"]),
                   pulley_radius=float(d["pulley_radius_m"]))


@dataclass(frozen=True)
class CableState:
    input_tension: float
    output_tension: float
    cable_velocity: float
    friction_force: float
    normal_force: float


def _direction(cable_velocity: float) -> float:
    if cable_velocity == 0.0:
        raise StictionRegimeError(
            "sliding friction is undefined at zero cable velocity (stiction regime)")
    if math.isnan(cable_velocity):
        raise ValueError("cable velocity is NaN")
    return 1.0 if cable_velocity > 0.0 else -1.0


def input_tension(motor_torque: float, model: BowdenModel) -> float:
    """Cable tension leaving the pulley for a given motor torque."""
    return motor_torque / model.pulley_radius


def output_tension(input_tension: float, cable_velocity: float, model: BowdenModel) -> float:
    """Tension delivered at the anchor point after sheath friction.

    Raises
    ------
    StictionRegimeError
        If ``cable_velocity`` is exactly zero.
    """
    if input_tension < 0.0:
        raise ValueError("input tension must be non-negative (a cable cannot push)")
    return input_tension * model.gain(_direction(cable_velocity))


def friction_components(input_tension: float, cable_velocity: float,
                        model: BowdenModel) -> CableState:
    """Full force balance of the cable inside the sheath."""
    if input_tension < 0.0:
        raise ValueError("input tension must be non-negative (a cable cannot push)")
    s = _direction(cable_velocity)
    a = model.friction_term
    friction = s * 2.0 * input_tension * a / (1.0 + s * a)
    t_out = input_tension - friction
    normal = (input_tension + t_out) * math.sin(model.phi / 2.0)
    return CableState(
        input_tension=input_tension,
        output_tension=t_out,
        cable_velocity=cable_velocity,
        friction_force=friction,
        normal_force=normal,
    )


def inverse_slope(model: BowdenModel, direction: float) -> float:
    """Motor torque per newton of output tension, ``R_p / gain``.

    This is the slope an ideal identification should recover for the
    given direction (+1 raising, -1 lowering).
    """
    return model.pulley_radius / model.gain(direction)
