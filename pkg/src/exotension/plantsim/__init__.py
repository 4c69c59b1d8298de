"""Simulated test bench: arm and mannequin dynamics, drive losses, protocols."""
from .dynamics import (ArmPlant, StictionModel, TDUModel, apply_stiction, kinetic_friction,
                       step_dynamics, stiction_friction)
from .kernels import BACKEND, compiled_available
from .protocols import (HumanModel, IdentificationProtocol, IdentificationRun, SupportLevel,
                        TrialLog, TrialProtocol, run_identification_protocol,
                        run_trial_protocol)
from .trajectory import min_jerk_duration, min_jerk_trajectory, raise_lower_cycles

__all__ = [
    "ArmPlant", "StictionModel", "TDUModel", "apply_stiction", "kinetic_friction",
    "step_dynamics", "stiction_friction", "BACKEND", "compiled_available", "HumanModel",
    "IdentificationProtocol", "IdentificationRun", "SupportLevel", "TrialLog",
    "TrialProtocol", "run_identification_protocol", "run_trial_protocol",
    "min_jerk_duration", "min_jerk_trajectory", "raise_lower_cycles",
]
