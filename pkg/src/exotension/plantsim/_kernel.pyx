# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled trial loop; arithmetic matches ``_kernel_py`` operation for operation."""
import numpy as np
from libc.math cimport sin, exp, M_PI

N_OUT = 10


def simulate_trial(const double[::1] theta_ref, const double[::1] dtheta_ref,
                   const double[::1] ddtheta_ref, const double[::1] human_noise,
                   const double[::1] imu_noise, const double[::1] p,
                   double theta0, double dtheta0):
    cdef Py_ssize_t n = theta_ref.shape[0]
    out_arr = np.empty((n, N_OUT))
    cdef double[:, ::1] out = out_arr

    cdef double dt = p[0], inertia = p[1], grav = p[2], damping = p[3], r = p[4], rp = p[5]
    cdef double fa = p[6], sheath_db = p[7], jm = p[8], bm = p[9], tau_max = p[10]
    cdef double fb = p[11], st_db = p[12], st_decay = p[13]
    cdef double m_r = p[14], b_r = p[15], m_l = p[16], b_l = p[17]
    cdef double mid = p[18], steep = p[19], alpha = p[20]
    cdef double c_t = p[21], pre = p[22], kp = p[23], kd = p[24], c_h = p[25]
    cdef double th_lo = p[26], th_hi = p[27]
    cdef double ratio = r / rp

    cdef double th = theta0, thd = dtheta0, vest = 0.0, prev = 0.0
    cdef double thm, thc, t_des, z, w, tau_low, tau_des, tau_cmd, t_exp, tau_h
    cdef double v_cable, omega, s, gain, rest, drive, aw, fr, held, a_db, sg
    cdef double net, acc, t_in, t_out
    cdef Py_ssize_t k

    for k in range(n):
        thm = th + imu_noise[k]
        if k > 0:
            vest += alpha * ((thm - prev) / dt - vest)
        prev = thm
        if thm < 0.0:
            thc = 0.0
        elif thm > M_PI:
            thc = M_PI
        else:
            thc = thm

        t_des = c_t * sin(thc)
        if t_des < pre:
            t_des = pre
        z = -steep * (vest - mid)
        if z > 700.0:
            w = 0.0
        else:
            w = 1.0 / (1.0 + exp(z))
        tau_low = b_l + m_l * t_des
        tau_des = tau_low + ((b_r + m_r * t_des) - tau_low) * w
        tau_cmd = tau_des
        if tau_cmd < 0.0:
            tau_cmd = 0.0
        elif tau_cmd > tau_max:
            tau_cmd = tau_max

        t_exp = c_h * sin(theta_ref[k])
        if t_exp < pre:
            t_exp = pre
        tau_h = (grav * sin(theta_ref[k]) + inertia * ddtheta_ref[k]
                 + damping * dtheta_ref[k] - r * t_exp
                 + kp * (theta_ref[k] - th) + kd * (dtheta_ref[k] - thd) + human_noise[k])

        v_cable = r * thd
        omega = v_cable / rp
        s = v_cable / sheath_db
        if s > 1.0:
            s = 1.0
        elif s < -1.0:
            s = -1.0
        gain = 1.0 - s * 2.0 * fa / (1.0 + s * fa)
        rest = tau_h - grav * sin(th) - damping * thd
        drive = tau_cmd - bm * omega + rest / (gain * ratio)
        aw = omega if omega >= 0.0 else -omega
        if fb > 0.0:
            if aw >= st_db:
                fr = fb * exp(-(aw - st_db) / st_decay)
                if omega < 0.0:
                    fr = -fr
            else:
                held = drive
                if held > fb:
                    held = fb
                elif held < -fb:
                    held = -fb
                a_db = aw / st_db
                sg = 0.0
                if omega > 0.0:
                    sg = 1.0
                elif omega < 0.0:
                    sg = -1.0
                fr = (1.0 - a_db) * held + a_db * sg * fb
        else:
            fr = 0.0
        net = drive - fr
        acc = gain * ratio * net / (inertia + gain * ratio * ratio * jm)
        t_in = (tau_cmd - fr - bm * omega - jm * ratio * acc) / rp
        if t_in < 0.0:
            t_in = 0.0
            acc = rest / inertia
        t_out = gain * t_in

        out[k, 0] = th
        out[k, 1] = thd
        out[k, 2] = thm
        out[k, 3] = vest
        out[k, 4] = t_des
        out[k, 5] = tau_des
        out[k, 6] = tau_cmd
        out[k, 7] = t_in
        out[k, 8] = t_out
        out[k, 9] = tau_h

        thd = thd + dt * acc
        th = th + dt * thd
        if th < th_lo:
            th = th_lo
            if thd < 0.0:
                thd = 0.0
        elif th > th_hi:
            th = th_hi
            if thd > 0.0:
                thd = 0.0

    return out_arr
