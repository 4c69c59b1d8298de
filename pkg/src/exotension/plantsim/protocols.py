"""The two experiment protocols run on the simulated bench.

``run_identification_protocol`` reproduces the mannequin sweep used to
identify the inverse model: the drive is speed controlled at quasi-constant
spool velocities while the mannequin applies a constant load.
``run_trial_protocol`` reproduces one speed/support condition of the user
study with a simple reference-tracking human in the loop.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import signal

from ..controller import TensionController
from ..identification import SampleLog
from ..transmission import BowdenModel
from . import kernels
from .dynamics import ArmPlant, TDUModel, kinetic_friction_array
from .trajectory import raise_lower_cycles


# -- identification protocol ---------------------------------------------------

@dataclass(frozen=True)
class IdentificationProtocol:
    """Grid of spool velocities (rad/s, both signs) and mannequin loads (Nm)."""

    spool_velocities: tuple = (0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0)
    mannequin_loads: tuple = (0.5, 1.0, 2.0, 3.0, 4.0)
    repetitions: int = 5
    angle_range_deg: tuple = (20.0, 110.0)
    ramp_time: float = 0.2
    dwell_time: float = 0.3
    log_rate: float = 200.0

    def __post_init__(self):
        if not self.spool_velocities or min(self.spool_velocities) <= 0:
            raise ValueError("spool velocities must be positive magnitudes")
        if not self.mannequin_loads or min(self.mannequin_loads) <= 0:
            raise ValueError("mannequin loads must be positive")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        lo, hi = self.angle_range_deg
        if not 0.0 <= lo < hi <= 180.0:
            raise ValueError("angle range must satisfy 0 <= low < high <= 180 deg")
        if self.ramp_time <= 0 or self.dwell_time < 0 or self.log_rate <= 0:
            raise ValueError("ramp_time and log_rate must be positive, dwell_time >= 0")


@dataclass(frozen=True)
class Block:
    velocity: float       # signed spool velocity, rad/s
    load: float           # Nm
    repetition: int
    t_start: float
    ramp: float
    cruise: float
    theta_start: float
    feasible: bool = True
    peak_torque: float = 0.0

    @property
    def direction(self) -> str:
        return "raising" if self.velocity > 0 else "lowering"

    @property
    def moving_time(self) -> float:
        return 2.0 * self.ramp + self.cruise


@dataclass
class IdentificationRun:
    log: SampleLog
    blocks: list
    block_index: np.ndarray

    @property
    def infeasible(self):
        return [b for b in self.blocks if not b.feasible]


def _spool_profile(tau, v, ramp, cruise):
    """Speed-controlled spool motion with cosine ramps; returns angle, speed, acceleration."""
    tau = np.asarray(tau, dtype=float)
    pos = np.empty_like(tau)
    vel = np.empty_like(tau)
    acc = np.empty_like(tau)
    k = math.pi / ramp
    up = tau < ramp
    cr = (tau >= ramp) & (tau < ramp + cruise)
    dn = (tau >= ramp + cruise) & (tau < 2 * ramp + cruise)
    rest = tau >= 2 * ramp + cruise

    t = tau[up]
    vel[up] = 0.5 * v * (1.0 - np.cos(k * t))
    pos[up] = 0.5 * v * (t - np.sin(k * t) / k)
    acc[up] = 0.5 * v * k * np.sin(k * t)

    t = tau[cr] - ramp
    vel[cr] = v
    pos[cr] = 0.5 * v * ramp + v * t
    acc[cr] = 0.0

    u = tau[dn] - ramp - cruise
    vel[dn] = 0.5 * v * (1.0 + np.cos(k * u))
    pos[dn] = 0.5 * v * ramp + v * cruise + 0.5 * v * (u + np.sin(k * u) / k)
    acc[dn] = -0.5 * v * k * np.sin(k * u)

    vel[rest] = 0.0
    pos[rest] = v * (ramp + cruise)
    acc[rest] = 0.0
    return pos, vel, acc


def run_identification_protocol(model: BowdenModel, plant: ArmPlant, cfg: IdentificationProtocol,
                                noise: float = 0.5, tdu: TDUModel = TDUModel(), seed=None,
                                torque_noise: float = 0.0) -> IdentificationRun:
    """Simulate the whole mannequin sweep and return the logged channels.

    The drive follows its speed profile exactly, so the motor torque is
    obtained from the inverse dynamics of mannequin arm, sheath and drive.
    Conditions whose torque exceeds ``tdu.max_torque`` are flagged as
    infeasible in the block list and logged with the drive at rest, so the
    steady-state selection never picks them up.
    """
    if noise < 0 or torque_noise < 0:
        raise ValueError("noise levels must be non-negative")
    mannequin = replace(plant, load_mass=0.0)
    ratio = mannequin.moment_arm / model.pulley_radius
    lo, hi = (math.radians(a) for a in cfg.angle_range_deg)
    spool_travel = ratio * (hi - lo)

    blocks = []
    t0 = 0.0
    for load in cfg.mannequin_loads:
        for vmag in cfg.spool_velocities:
            for rep in range(cfg.repetitions):
                for sign, th0 in ((1.0, lo), (-1.0, hi)):
                    ramp = min(cfg.ramp_time, spool_travel / vmag)
                    cruise = spool_travel / vmag - ramp
                    blocks.append(Block(sign * vmag, load, rep, t0, ramp, cruise, th0))
                    t0 += 2 * ramp + cruise + cfg.dwell_time

    n = int(math.floor(t0 * cfg.log_rate)) + 1
    t = np.arange(n) / cfg.log_rate
    starts = np.array([b.t_start for b in blocks])
    bidx = np.searchsorted(starts, t, side="right") - 1

    omega = np.empty(n)
    omega_dot = np.empty(n)
    theta = np.empty(n)
    load = np.empty(n)
    for i, b in enumerate(blocks):
        sel = bidx == i
        pos, vel, acc = _spool_profile(t[sel] - b.t_start, abs(b.velocity), b.ramp, b.cruise)
        s = 1.0 if b.velocity > 0 else -1.0
        omega[sel] = s * vel
        omega_dot[sel] = s * acc
        theta[sel] = b.theta_start + s * pos / ratio
        load[sel] = b.load

    theta_dot = omega / ratio
    theta_ddot = omega_dot / ratio
    t_out = (mannequin.inertia * theta_ddot + mannequin.gravity_moment * np.sin(theta)
             + load + mannequin.viscous_damping * theta_dot) / mannequin.moment_arm
    v_cable = model.pulley_radius * omega
    direction = np.clip(v_cable / tdu.sheath_deadband, -1.0, 1.0)
    t_in = t_out / model.gain(direction)
    friction = np.zeros(n)
    if tdu.stiction is not None:
        friction = kinetic_friction_array(omega, tdu.stiction)
    torque = (model.pulley_radius * t_in + tdu.rotor_inertia * omega_dot
              + tdu.viscous_friction * omega + friction)

    keep = np.ones(n, dtype=bool)
    checked = []
    for i, b in enumerate(blocks):
        sel = bidx == i
        peak = float(np.max(np.abs(torque[sel]))) if np.any(sel) else 0.0
        ok = peak <= tdu.max_torque
        checked.append(replace(b, feasible=ok, peak_torque=peak))
        if not ok:
            keep &= ~sel
    blocks = checked

    rng = np.random.default_rng(seed)
    tension_meas = t_out + noise * rng.standard_normal(n)
    torque_meas = torque + torque_noise * rng.standard_normal(n)

    # dropping infeasible blocks would break uniform sampling, so they are
    # replaced by the drive at rest instead
    if not np.all(keep):
        omega = np.where(keep, omega, 0.0)
        omega_dot = np.where(keep, omega_dot, 0.0)
        torque_meas = np.where(keep, torque_meas, 0.0)

    log = SampleLog(t, omega, omega_dot, torque_meas, tension_meas, theta, cfg.log_rate)
    return IdentificationRun(log, blocks, bidx)


# -- trial protocol --------------------------------------------------------------

@dataclass(frozen=True)
class SupportLevel:
    name: str
    support_fraction: float


DEFAULT_SUPPORTS = (SupportLevel("pre", 0.0), SupportLevel("25%", 0.25),
                    SupportLevel("50%", 0.5))


@dataclass(frozen=True)
class TrialProtocol:
    peak_speeds_deg_s: tuple = (60.0, 120.0, 180.0)
    angle_range_deg: tuple = (20.0, 100.0)
    repetitions: int = 10
    supports: tuple = DEFAULT_SUPPORTS
    sim_rate: float = 1000.0
    log_rate: float = 100.0

    def __post_init__(self):
        if not self.peak_speeds_deg_s or min(self.peak_speeds_deg_s) <= 0:
            raise ValueError("peak speeds must be positive")
        lo, hi = self.angle_range_deg
        if not 0.0 <= lo < hi <= 180.0:
            raise ValueError("angle range must satisfy 0 <= low < high <= 180 deg")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.sim_rate < 200.0:
            raise ValueError("sim_rate must be at least 200 Hz (dt <= 5 ms)")
        ratio = self.sim_rate / self.log_rate
        if self.log_rate <= 0 or abs(ratio - round(ratio)) > 1e-9:
            raise ValueError("log_rate must divide sim_rate")


@dataclass(frozen=True)
class HumanModel:
    """Reference-tracking torque source standing in for the participant.

    Feedback gains give a critically damped closed loop of ``bandwidth_hz``;
    the feed-forward part is the inverse dynamics of the reference minus the
    assistance the participant expects from the suit.
    """

    bandwidth_hz: float = 2.0
    damping_ratio: float = 1.0
    torque_noise: float = 0.05
    noise_cutoff_hz: float = 5.0
    imu_noise: float = 0.0

    def gains(self, inertia: float):
        wn = 2.0 * math.pi * self.bandwidth_hz
        return inertia * wn * wn, 2.0 * self.damping_ratio * inertia * wn


@dataclass
class TrialLog:
    """Samples of one condition, all repetitions back to back."""

    time: np.ndarray
    repetition: np.ndarray
    raising: np.ndarray
    normalized_time: np.ndarray
    theta_ref: np.ndarray
    theta_dot_ref: np.ndarray
    theta: np.ndarray
    theta_dot: np.ndarray
    theta_dot_est: np.ndarray
    desired_tension: np.ndarray
    applied_tension: np.ndarray
    desired_torque: np.ndarray
    applied_motor_torque: np.ndarray
    desired_shoulder_torque: np.ndarray
    applied_shoulder_torque: np.ndarray
    sample_rate: float = 100.0
    meta: dict = field(default_factory=dict)

    CSV_COLUMNS = ("t_s", "repetition", "phase", "normalized_time", "theta_ref_rad",
                   "theta_dot_ref_rad_s", "theta_rad", "theta_dot_rad_s", "theta_dot_est_rad_s",
                   "desired_tension_n", "applied_tension_n", "desired_torque_nm",
                   "applied_motor_torque_nm", "desired_shoulder_torque_nm",
                   "applied_shoulder_torque_nm")

    def __len__(self):
        return self.time.size

    @property
    def tension_error(self):
        return self.applied_tension - self.desired_tension

    def repetitions(self):
        return np.unique(self.repetition)

    def select(self, mask) -> "TrialLog":
        kw = {k: (v[mask] if isinstance(v, np.ndarray) else v) for k, v in vars(self).items()}
        return TrialLog(**kw)


def trial_parameters(controller: TensionController, model: BowdenModel, plant: ArmPlant,
                     tdu: TDUModel, human: HumanModel, dt: float) -> np.ndarray:
    """Pack everything the integration loop needs into the kernel's vector."""
    p = np.zeros(kernels.N_PARAMS)
    assist = controller.assist
    kp, kd = human.gains(plant.inertia)
    tau = 1.0 / (2.0 * math.pi * controller.velocity_cutoff_hz)
    c_t = assist.support_fraction * assist.gravity_moment / assist.moment_arm
    p[kernels.P_DT] = dt
    p[kernels.P_INERTIA] = plant.inertia
    p[kernels.P_GRAV] = plant.gravity_moment
    p[kernels.P_DAMPING] = plant.viscous_damping
    p[kernels.P_R] = plant.moment_arm
    p[kernels.P_RP] = model.pulley_radius
    p[kernels.P_FA] = model.friction_term
    p[kernels.P_SHEATH_DB] = tdu.sheath_deadband
    p[kernels.P_JM] = tdu.rotor_inertia
    p[kernels.P_BM] = tdu.viscous_friction
    p[kernels.P_TAU_MAX] = tdu.max_torque
    if tdu.stiction is not None:
        p[kernels.P_FB] = tdu.stiction.breakaway_torque
        p[kernels.P_ST_DB] = tdu.stiction.velocity_deadband
        p[kernels.P_ST_DECAY] = tdu.stiction.stribeck_decay
    else:
        p[kernels.P_ST_DB] = 1.0
        p[kernels.P_ST_DECAY] = 1.0
    reg = controller.regression
    p[kernels.P_M_R] = reg.slope_raising
    p[kernels.P_B_R] = reg.intercept_raising
    p[kernels.P_M_L] = reg.slope_lowering
    p[kernels.P_B_L] = reg.intercept_lowering
    p[kernels.P_MID] = controller.blend.midpoint
    p[kernels.P_STEEP] = controller.blend.steepness
    p[kernels.P_ALPHA] = dt / (tau + dt)
    p[kernels.P_C_T] = c_t
    p[kernels.P_PRE] = assist.pretension
    p[kernels.P_KP] = kp
    p[kernels.P_KD] = kd
    p[kernels.P_C_H] = c_t
    p[kernels.P_TH_LO] = plant.theta_min
    p[kernels.P_TH_HI] = plant.theta_max
    return p


def _band_limited_noise(rng, n, std, cutoff_hz, rate):
    if std == 0.0:
        return np.zeros(n)
    a = 1.0 - math.exp(-2.0 * math.pi * cutoff_hz / rate)
    white = rng.standard_normal(n)
    y = signal.lfilter([a], [1.0, a - 1.0], white)
    return y * std / math.sqrt(a / (2.0 - a))


def run_trial_protocol(controller: TensionController, model: BowdenModel, plant: ArmPlant,
                       cfg: TrialProtocol, peak_speed_deg_s: float,
                       human: HumanModel = HumanModel(), tdu: TDUModel = TDUModel(),
                       load_cell_noise: float = 0.0, seed=None, backend=None) -> TrialLog:
    """Simulate all repetitions of one speed condition for one controller.

    Raises
    ------
    ValueError
        If the controller's cable moment arm differs from the plant's.
    """
    if not math.isclose(controller.assist.moment_arm, plant.moment_arm, rel_tol=1e-9):
        raise ValueError(f"controller moment arm {controller.assist.moment_arm} m does not "
                         f"match plant moment arm {plant.moment_arm} m")
    if load_cell_noise < 0:
        raise ValueError("load_cell_noise must be non-negative")
    lo, hi = (math.radians(a) for a in cfg.angle_range_deg)
    if not (plant.theta_min <= lo and hi <= plant.theta_max):
        raise ValueError("trial angle range lies outside the plant joint limits")
    ref = raise_lower_cycles(lo, hi, math.radians(peak_speed_deg_s), cfg.repetitions,
                             cfg.sim_rate)
    n = ref.time.size
    dt = 1.0 / cfg.sim_rate
    rng = np.random.default_rng(seed)
    human_noise = _band_limited_noise(rng, n, human.torque_noise, human.noise_cutoff_hz,
                                      cfg.sim_rate)
    imu_noise = human.imu_noise * rng.standard_normal(n) if human.imu_noise else np.zeros(n)

    params = trial_parameters(controller, model, plant, tdu, human, dt)
    out = kernels.simulate_trial(ref.position, ref.velocity, ref.acceleration, human_noise,
                                 imu_noise, params, ref.position[0], 0.0, backend=backend)

    step = int(round(cfg.sim_rate / cfg.log_rate))
    idx = np.arange(0, n, step)
    col = {name: out[idx, i] for i, name in enumerate(kernels.OUT_COLUMNS)}
    applied = col["output_tension"] + load_cell_noise * rng.standard_normal(idx.size)
    r = plant.moment_arm
    return TrialLog(
        time=ref.time[idx],
        repetition=ref.repetition[idx],
        raising=ref.raising[idx],
        normalized_time=ref.normalized_time[idx],
        theta_ref=ref.position[idx],
        theta_dot_ref=ref.velocity[idx],
        theta=col["theta"],
        theta_dot=col["theta_dot"],
        theta_dot_est=col["theta_dot_est"],
        desired_tension=col["desired_tension"],
        applied_tension=applied,
        desired_torque=col["desired_torque"],
        applied_motor_torque=model.pulley_radius * col["input_tension"],
        desired_shoulder_torque=r * col["desired_tension"],
        applied_shoulder_torque=r * applied,
        sample_rate=cfg.log_rate,
        meta={"peak_speed_deg_s": peak_speed_deg_s,
              "support_fraction": controller.assist.support_fraction},
    )
