"""Pure-Python trial loop; the compiled ``_kernel`` module mirrors it line by line.

Parameter layout and output columns are defined in :mod:`.kernels`.
"""
import math

import numpy as np

N_OUT = 10


def simulate_trial(theta_ref, dtheta_ref, ddtheta_ref, human_noise, imu_noise, p,
                   theta0, dtheta0):
    n = len(theta_ref)
    out = np.empty((n, N_OUT))
    # plain lists are much faster to index from Python than ndarrays
    theta_ref = list(map(float, theta_ref))
    dtheta_ref = list(map(float, dtheta_ref))
    ddtheta_ref = list(map(float, ddtheta_ref))
    human_noise = list(map(float, human_noise))
    imu_noise = list(map(float, imu_noise))
    p = list(map(float, p))
    rows = [None] * n

    dt = p[0]; inertia = p[1]; grav = p[2]; damping = p[3]; r = p[4]; rp = p[5]
    fa = p[6]; sheath_db = p[7]; jm = p[8]; bm = p[9]; tau_max = p[10]
    fb = p[11]; st_db = p[12]; st_decay = p[13]
    m_r = p[14]; b_r = p[15]; m_l = p[16]; b_l = p[17]
    mid = p[18]; steep = p[19]; alpha = p[20]
    c_t = p[21]; pre = p[22]; kp = p[23]; kd = p[24]; c_h = p[25]
    th_lo = p[26]; th_hi = p[27]
    ratio = r / rp

    th = theta0
    thd = dtheta0
    vest = 0.0
    prev = 0.0

    for k in range(n):
        # sensing and speed estimate
        thm = th + imu_noise[k]
        if k > 0:
            vest += alpha * ((thm - prev) / dt - vest)
        prev = thm
        if thm < 0.0:
            thc = 0.0
        elif thm > math.pi:
            thc = math.pi
        else:
            thc = thm

        # controller
        t_des = c_t * math.sin(thc)
        if t_des < pre:
            t_des = pre
        z = -steep * (vest - mid)
        if z > 700.0:
            w = 0.0
        else:
            w = 1.0 / (1.0 + math.exp(z))
        tau_low = b_l + m_l * t_des
        tau_des = tau_low + ((b_r + m_r * t_des) - tau_low) * w
        tau_cmd = tau_des
        if tau_cmd < 0.0:
            tau_cmd = 0.0
        elif tau_cmd > tau_max:
            tau_cmd = tau_max

        # human: inverse dynamics of the reference minus expected assistance, plus PD
        t_exp = c_h * math.sin(theta_ref[k])
        if t_exp < pre:
            t_exp = pre
        tau_h = (grav * math.sin(theta_ref[k]) + inertia * ddtheta_ref[k]
                 + damping * dtheta_ref[k] - r * t_exp
                 + kp * (theta_ref[k] - th) + kd * (dtheta_ref[k] - thd) + human_noise[k])

        # transmission and drive
        v_cable = r * thd
        omega = v_cable / rp
        s = v_cable / sheath_db
        if s > 1.0:
            s = 1.0
        elif s < -1.0:
            s = -1.0
        gain = 1.0 - s * 2.0 * fa / (1.0 + s * fa)
        rest = tau_h - grav * math.sin(th) - damping * thd
        drive = tau_cmd - bm * omega + rest / (gain * ratio)
        aw = omega if omega >= 0.0 else -omega
        if fb > 0.0:
            if aw >= st_db:
                fr = fb * math.exp(-(aw - st_db) / st_decay)
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

        rows[k] = (th, thd, thm, vest, t_des, tau_des, tau_cmd, t_in, t_out, tau_h)

        # semi-implicit Euler with inelastic stops
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

    if n:
        out[:] = rows
    return out
