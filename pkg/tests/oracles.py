"""Independent reference computations shared by the tests."""
import math

import numpy as np
from scipy import optimize


def sheath_force_balance(t_in, sign, mu, phi):
    """Solve the cable force balance numerically for (T_out, f, N).

    Unknown is T_out; the normal force is ``N = (T_in + T_out) sin(phi/2)``,
    friction ``f = sign * mu * N`` and equilibrium ``T_out = T_in - f``.
    """
    s2 = math.sin(phi / 2.0)

    def residual(t_out):
        normal = (t_in + t_out) * s2
        return t_out - (t_in - sign * mu * normal)

    if t_in == 0.0:
        return 0.0, 0.0, 0.0
    hi = 4.0 * t_in / max(1e-12, 1.0 - mu * s2)
    t_out = optimize.brentq(residual, 0.0, hi, xtol=max(1e-15 * t_in, 1e-300), rtol=4 * np.finfo(float).eps,
                            maxiter=500)
    normal = (t_in + t_out) * s2
    return t_out, sign * mu * normal, normal


def butterworth_gain_sq(f, fc, fs, order):
    """Squared magnitude of a digital (bilinear) Butterworth low-pass."""
    w = math.tan(math.pi * f / fs) / math.tan(math.pi * fc / fs)
    return 1.0 / (1.0 + w ** (2 * order))


def loop_rmse(a, b):
    acc = 0.0
    for x, y in zip(a, b):
        acc += (x - y) * (x - y)
    return math.sqrt(acc / len(a))


def loop_pct_rmse(ref, meas):
    acc = 0.0
    for r, m in zip(ref, meas):
        p = 100.0 * (m - r) / r
        acc += p * p
    return math.sqrt(acc / len(ref))


def loop_mean(x):
    acc = 0.0
    for v in x:
        acc += v
    return acc / len(x)
