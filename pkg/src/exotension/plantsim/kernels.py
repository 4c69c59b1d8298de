"""Backend selection for the trial integration loop.

The compiled extension is used when it was built; otherwise, or when the
environment variable ``EXOTENSION_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the pure-Python loop is used.  Both take the same packed
parameter vector and return the same columns.
"""
import os

import numpy as np

from . import _kernel_py

# parameter vector layout
P_DT, P_INERTIA, P_GRAV, P_DAMPING, P_R, P_RP = range(6)
P_FA, P_SHEATH_DB, P_JM, P_BM, P_TAU_MAX = range(6, 11)
P_FB, P_ST_DB, P_ST_DECAY = range(11, 14)
P_M_R, P_B_R, P_M_L, P_B_L = range(14, 18)
P_MID, P_STEEP, P_ALPHA = range(18, 21)
P_C_T, P_PRE, P_KP, P_KD, P_C_H = range(21, 26)
P_TH_LO, P_TH_HI = 26, 27
N_PARAMS = 28

# output columns
OUT_COLUMNS = ("theta", "theta_dot", "theta_meas", "theta_dot_est", "desired_tension",
               "desired_torque", "commanded_torque", "input_tension", "output_tension",
               "human_torque")

_FORCE_PURE = os.environ.get("EXOTENSION_PURE_PYTHON", "") not in ("", "0")

_compiled = None
if not _FORCE_PURE:
    try:
        from . import _kernel as _compiled
    except ImportError:  # extension not built
        _compiled = None

BACKEND = "compiled" if _compiled is not None else "python"


def get_backend(name=None):
    """Return the ``simulate_trial`` implementation for ``name`` (or the default)."""
    if name is None:
        name = BACKEND
    if name == "python":
        return _kernel_py.simulate_trial
    if name == "compiled":
        if _compiled is None:
            raise RuntimeError("compiled kernel not available; build the extension")
        return _compiled.simulate_trial
    raise ValueError(f"unknown backend {name!r}")


def compiled_available() -> bool:
    return _compiled is not None


def simulate_trial(theta_ref, dtheta_ref, ddtheta_ref, human_noise, imu_noise, params,
                   theta0, dtheta0, backend=None):
    arrays = [np.ascontiguousarray(a, dtype=np.float64)
              for a in (theta_ref, dtheta_ref, ddtheta_ref, human_noise, imu_noise)]
    n = arrays[0].shape[0]
    if any(a.shape != (n,) for a in arrays):
        raise ValueError("reference and noise arrays must share one length")
    p = np.ascontiguousarray(params, dtype=np.float64)
    if p.shape != (N_PARAMS,):
        raise ValueError(f"expected {N_PARAMS} parameters, got {p.shape}")
    return get_backend(backend)(*arrays, p, float(theta0), float(dtheta0))
