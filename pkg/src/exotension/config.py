"""JSON run configuration: schema, defaults, validation and object builders.

A config file only needs the keys it changes; everything else comes from
:data:`DEFAULTS`.  Structural problems are reported with the JSON path of
the offending field, e.g. ``plant.tdu.stiction.breakaway_torque_nm``.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass
from pathlib import Path

import jsonschema

from .controller import DirectionalRegression, GravityAssist, TensionController, sigmoid_params
from .identification import SteadyStateCriteria
from .metrics import EnvelopeConfig, SparcConfig
from .plantsim.dynamics import ArmPlant, StictionModel, TDUModel
from .plantsim.protocols import HumanModel, IdentificationProtocol, SupportLevel, TrialProtocol
from .transmission import BowdenModel

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    """Invalid configuration; ``path`` is the dotted location of the problem."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path or '<root>'}: {message}")


DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "rng_seed": 0,
    "output_dir": "out",
    "transmission": {"mu": 0.25, "phi_rad": math.pi / 2, "pulley_radius_m": 0.035},
    "controller": {
        "support_fraction": 0.5,
        "pretension_n": 10.0,
        "moment_arm_m": 0.11,
        "v001_rad_s": -1.0,
        "v099_rad_s": 1.0,
        "velocity_cutoff_hz": 5.0,
    },
    "plant": {
        "inertia_kgm2": 0.08,
        "arm_mass_kg": 2.1,
        "arm_com_length_m": 0.13,
        "load_mass_kg": 0.5,
        "load_lever_m": 0.30,
        "viscous_damping_nms": 0.02,
        "moment_arm_m": 0.11,
        "load_cell_noise_n": 0.0,
        "tdu": {
            "rotor_inertia_kgm2": 4e-3,
            "viscous_friction_nms": 0.02,
            "max_torque_nm": 9.0,
            "sheath_deadband_m_s": 1e-3,
            "stiction": {"breakaway_torque_nm": 0.20, "velocity_deadband_rad_s": 0.05,
                         "stribeck_decay_rad_s": 0.5},
        },
        "human": {"bandwidth_hz": 2.0, "damping_ratio": 1.0, "torque_noise_nm": 0.05,
                  "noise_cutoff_hz": 5.0, "imu_noise_rad": 0.0},
    },
    "protocol": {
        "identification": {
            "spool_velocities_rad_s": [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
            "mannequin_loads_nm": [0.5, 1.0, 2.0, 3.0, 4.0],
            "repetitions": 5,
            "angle_range_deg": [20.0, 110.0],
            "ramp_time_s": 0.2,
            "dwell_time_s": 0.3,
            "log_rate_hz": 200.0,
            "tension_noise_n": 0.5,
            "filter_cutoff_hz": 5.0,
            "filter_order": 3,
            "steady_state": {"min_speed_deg_s": 15.0, "max_acceleration_deg_s2": 15.0,
                             "angle_min_deg": 20.0, "angle_max_deg": 90.0,
                             "min_torque_nm": 0.0},
        },
        "trial": {
            "peak_speeds_deg_s": [60.0, 120.0, 180.0],
            "angle_range_deg": [20.0, 100.0],
            "repetitions": 10,
            "supports": [{"name": "pre", "support_fraction": 0.0},
                         {"name": "25%", "support_fraction": 0.25},
                         {"name": "50%", "support_fraction": 0.5}],
            "sim_rate_hz": 1000.0,
            "log_rate_hz": 100.0,
        },
    },
    "metrics": {
        "drop_first": True,
        "n_points": 1001,
        "percentage_epsilon": 1e-6,
        "sparc": {"freq_cutoff_hz": 10.0, "amp_threshold": 0.05, "pad_level": 4},
        "envelope": {"bandpass_low_hz": 20.0, "bandpass_high_hz": 400.0, "filter_order": 3,
                     "rms_window_s": 0.1},
    },
}


def _num(minimum=None, exclusive=None):
    s = {"type": "number"}
    if minimum is not None:
        s["minimum"] = minimum
    if exclusive is not None:
        s["exclusiveMinimum"] = exclusive
    return s


def _obj(props, required=()):
    return {"type": "object", "properties": props, "additionalProperties": False,
            "required": list(required)}


_POS = _num(exclusive=0)
_NONNEG = _num(minimum=0)
_INT_POS = {"type": "integer", "minimum": 1}
_RANGE = {"type": "array", "items": _num(minimum=0), "minItems": 2, "maxItems": 2}

SCHEMA = _obj({
    "schema_version": {"const": SCHEMA_VERSION},
    "rng_seed": {"type": "integer", "minimum": 0, "maximum": 2 ** 64 - 1},
    "output_dir": {"type": "string"},
    "transmission": _obj({"mu": _NONNEG, "phi_rad": _num(0), "pulley_radius_m": _POS}),
    "controller": _obj({
        "support_fraction": {"type": "number", "minimum": 0, "maximum": 1},
        "pretension_n": _NONNEG, "moment_arm_m": _POS,
        "v001_rad_s": {"type": "number"}, "v099_rad_s": {"type": "number"},
        "velocity_cutoff_hz": _POS,
        "m_raise": _POS, "b_raise": {"type": "number"},
        "m_lower": _POS, "b_lower": {"type": "number"},
        "r2_raise": {"type": "number", "minimum": 0, "maximum": 1},
        "r2_lower": {"type": "number", "minimum": 0, "maximum": 1},
    }),
    "plant": _obj({
        "inertia_kgm2": _POS, "arm_mass_kg": _NONNEG, "arm_com_length_m": _NONNEG,
        "load_mass_kg": _NONNEG, "load_lever_m": _NONNEG, "viscous_damping_nms": _NONNEG,
        "moment_arm_m": _POS, "load_cell_noise_n": _NONNEG,
        "tdu": _obj({
            "rotor_inertia_kgm2": _NONNEG, "viscous_friction_nms": _NONNEG,
            "max_torque_nm": _POS, "sheath_deadband_m_s": _POS,
            "stiction": {"oneOf": [{"type": "null"}, _obj({
                "breakaway_torque_nm": _NONNEG, "velocity_deadband_rad_s": _POS,
                "stribeck_decay_rad_s": _POS})]},
        }),
        "human": _obj({"bandwidth_hz": _POS, "damping_ratio": _POS, "torque_noise_nm": _NONNEG,
                       "noise_cutoff_hz": _POS, "imu_noise_rad": _NONNEG}),
    }),
    "protocol": _obj({
        "identification": _obj({
            "spool_velocities_rad_s": {"type": "array", "items": _POS, "minItems": 1},
            "mannequin_loads_nm": {"type": "array", "items": _POS, "minItems": 1},
            "repetitions": _INT_POS, "angle_range_deg": _RANGE,
            "ramp_time_s": _POS, "dwell_time_s": _NONNEG, "log_rate_hz": _POS,
            "tension_noise_n": _NONNEG, "filter_cutoff_hz": _POS, "filter_order": _INT_POS,
            "steady_state": _obj({
                "min_speed_deg_s": _POS, "max_acceleration_deg_s2": _POS,
                "angle_min_deg": {"type": "number"}, "angle_max_deg": {"type": "number"},
                "min_torque_nm": {"type": "number"}}),
        }),
        "trial": _obj({
            "peak_speeds_deg_s": {"type": "array", "items": _POS, "minItems": 1},
            "angle_range_deg": _RANGE, "repetitions": _INT_POS,
            "supports": {"type": "array", "minItems": 1, "items": _obj(
                {"name": {"type": "string", "minLength": 1},
                 "support_fraction": {"type": "number", "minimum": 0, "maximum": 1}},
                required=("name", "support_fraction"))},
            "sim_rate_hz": _POS, "log_rate_hz": _POS,
        }),
    }),
    "metrics": _obj({
        "drop_first": {"type": "boolean"}, "n_points": {"type": "integer", "minimum": 2},
        "percentage_epsilon": _POS,
        "sparc": _obj({"freq_cutoff_hz": _POS, "amp_threshold": _num(exclusive=0),
                       "pad_level": {"type": "integer", "minimum": 0}}),
        "envelope": _obj({"bandpass_low_hz": _POS, "bandpass_high_hz": _POS,
                          "filter_order": _INT_POS, "rms_window_s": _POS}),
    }),
})


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], value)
        else:
            out[key] = copy.deepcopy(value)
    return out


def _path(parts) -> str:
    return ".".join(f"[{p}]" if isinstance(p, int) else str(p) for p in parts).replace(".[", "[")


@dataclass(frozen=True)
class RunConfig:
    """A validated configuration; ``raw`` holds the merged JSON document."""

    raw: dict

    @property
    def rng_seed(self) -> int:
        return int(self.raw["rng_seed"])

    @property
    def output_dir(self) -> str:
        return self.raw["output_dir"]

    def with_seed(self, seed: int) -> "RunConfig":
        raw = copy.deepcopy(self.raw)
        raw["rng_seed"] = int(seed)
        return validate(raw)

    # -- builders -------------------------------------------------------------------

    def transmission(self) -> BowdenModel:
        return BowdenModel.from_dict(self.raw["transmission"])

    def plant(self) -> ArmPlant:
        p = self.raw["plant"]
        lo = math.radians(self.raw["protocol"]["trial"]["angle_range_deg"][0])
        return ArmPlant(inertia=p["inertia_kgm2"], arm_mass=p["arm_mass_kg"],
                        arm_com_length=p["arm_com_length_m"], load_mass=p["load_mass_kg"],
                        load_lever=p["load_lever_m"], viscous_damping=p["viscous_damping_nms"],
                        moment_arm=p["moment_arm_m"], theta=lo)

    def tdu(self) -> TDUModel:
        t = self.raw["plant"]["tdu"]
        st = t["stiction"]
        stiction = None if st is None else StictionModel(
            st["breakaway_torque_nm"], st["velocity_deadband_rad_s"], st["stribeck_decay_rad_s"])
        return TDUModel(rotor_inertia=t["rotor_inertia_kgm2"],
                        viscous_friction=t["viscous_friction_nms"],
                        max_torque=t["max_torque_nm"], stiction=stiction,
                        sheath_deadband=t["sheath_deadband_m_s"])

    def human(self) -> HumanModel:
        h = self.raw["plant"]["human"]
        return HumanModel(h["bandwidth_hz"], h["damping_ratio"], h["torque_noise_nm"],
                          h["noise_cutoff_hz"], h["imu_noise_rad"])

    def identification_protocol(self) -> IdentificationProtocol:
        i = self.raw["protocol"]["identification"]
        return IdentificationProtocol(tuple(i["spool_velocities_rad_s"]),
                                      tuple(i["mannequin_loads_nm"]), i["repetitions"],
                                      tuple(i["angle_range_deg"]), i["ramp_time_s"],
                                      i["dwell_time_s"], i["log_rate_hz"])

    def steady_state(self) -> SteadyStateCriteria:
        s = self.raw["protocol"]["identification"]["steady_state"]
        return SteadyStateCriteria(s["min_speed_deg_s"], s["max_acceleration_deg_s2"],
                                   s["angle_min_deg"], s["angle_max_deg"], s["min_torque_nm"])

    def trial_protocol(self) -> TrialProtocol:
        t = self.raw["protocol"]["trial"]
        supports = tuple(SupportLevel(s["name"], s["support_fraction"]) for s in t["supports"])
        return TrialProtocol(tuple(t["peak_speeds_deg_s"]), tuple(t["angle_range_deg"]),
                             t["repetitions"], supports, t["sim_rate_hz"], t["log_rate_hz"])

    def regression(self) -> DirectionalRegression | None:
        c = self.raw["controller"]
        keys = ("m_raise", "b_raise", "m_lower", "b_lower")
        present = [k for k in keys if k in c]
        if not present:
            return None
        if len(present) != len(keys):
            missing = ", ".join(k for k in keys if k not in c)
            raise ValueError(f"incomplete regression, missing {missing}")
        return DirectionalRegression.from_dict(c)

    def assist(self, support_fraction: float | None = None) -> GravityAssist:
        c, p = self.raw["controller"], self.raw["plant"]
        frac = c["support_fraction"] if support_fraction is None else support_fraction
        return GravityAssist(support_fraction=frac, arm_mass=p["arm_mass_kg"],
                             arm_com_length=p["arm_com_length_m"], load_mass=p["load_mass_kg"],
                             load_lever=p["load_lever_m"], moment_arm=c["moment_arm_m"],
                             pretension=c["pretension_n"])

    def controller(self, regression: DirectionalRegression,
                   support_fraction: float | None = None) -> TensionController:
        c = self.raw["controller"]
        return TensionController(regression, sigmoid_params(c["v001_rad_s"], c["v099_rad_s"]),
                                 self.assist(support_fraction), c["velocity_cutoff_hz"])

    def sparc(self) -> SparcConfig:
        s = self.raw["metrics"]["sparc"]
        return SparcConfig(s["freq_cutoff_hz"], s["amp_threshold"], s["pad_level"])

    def envelope(self) -> EnvelopeConfig:
        e = self.raw["metrics"]["envelope"]
        return EnvelopeConfig(e["bandpass_low_hz"], e["bandpass_high_hz"], e["filter_order"],
                              e["rms_window_s"])


def _cross_checks(raw: dict):
    ctl, plant, proto = raw["controller"], raw["plant"], raw["protocol"]
    if not math.isclose(ctl["moment_arm_m"], plant["moment_arm_m"], rel_tol=1e-9):
        raise ConfigError("controller.moment_arm_m",
                          f"{ctl['moment_arm_m']} does not match plant.moment_arm_m "
                          f"{plant['moment_arm_m']}")
    if not ctl["v001_rad_s"] < ctl["v099_rad_s"]:
        raise ConfigError("controller.v099_rad_s", "must be greater than v001_rad_s")
    ident = proto["identification"]
    if ident["filter_cutoff_hz"] >= 0.5 * ident["log_rate_hz"]:
        raise ConfigError("protocol.identification.filter_cutoff_hz",
                          f"must be below Nyquist of log_rate_hz ({0.5 * ident['log_rate_hz']} Hz)")
    trial = proto["trial"]
    if ctl["velocity_cutoff_hz"] >= 0.5 * trial["sim_rate_hz"]:
        raise ConfigError("controller.velocity_cutoff_hz",
                          "must be below Nyquist of protocol.trial.sim_rate_hz")
    if raw["metrics"]["sparc"]["freq_cutoff_hz"] > 0.5 * trial["log_rate_hz"]:
        raise ConfigError("metrics.sparc.freq_cutoff_hz",
                          "must not exceed Nyquist of protocol.trial.log_rate_hz")
    env = raw["metrics"]["envelope"]
    if not env["bandpass_low_hz"] < env["bandpass_high_hz"]:
        raise ConfigError("metrics.envelope.bandpass_high_hz", "must exceed bandpass_low_hz")
    for key in ("identification", "trial"):
        lo, hi = proto[key]["angle_range_deg"]
        if not lo < hi <= 180.0:
            raise ConfigError(f"protocol.{key}.angle_range_deg", "need low < high <= 180")
    names = [s["name"] for s in trial["supports"]]
    if len(set(names)) != len(names):
        raise ConfigError("protocol.trial.supports", "support names must be unique")


_BUILDERS = {
    "transmission": "transmission", "plant": "plant", "plant.tdu": "tdu",
    "plant.human": "human", "protocol.identification": "identification_protocol",
    "protocol.identification.steady_state": "steady_state", "protocol.trial": "trial_protocol",
    "metrics.sparc": "sparc", "metrics.envelope": "envelope",
}


def validate(document: dict) -> RunConfig:
    """Merge ``document`` over the defaults and validate it.

    Raises
    ------
    ConfigError
        On the first schema violation, cross-block inconsistency or value
        rejected by the model constructors.
    """
    if not isinstance(document, dict):
        raise ConfigError("", "config must be a JSON object")
    try:
        jsonschema.validate(document, SCHEMA)
    except jsonschema.ValidationError as exc:
        raise ConfigError(_path(exc.absolute_path), exc.message) from None
    raw = _merge(DEFAULTS, document)
    _cross_checks(raw)
    cfg = RunConfig(raw)
    for path, builder in _BUILDERS.items():
        try:
            getattr(cfg, builder)()
        except ValueError as exc:
            raise ConfigError(path, str(exc)) from None
    try:
        cfg.regression()
        cfg.controller(cfg.regression() or DirectionalRegression(1.0, 0.0, 0.5, 0.0))
    except ValueError as exc:
        raise ConfigError("controller", str(exc)) from None
    return cfg


def load(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror or exc}") from None
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: invalid JSON at line {exc.lineno} col {exc.colno}: "
                              f"{exc.msg}") from None
    return validate(document)


def default_config() -> RunConfig:
    return validate({})
