"""Stochastic Heun integration kernels.

Two implementations of each kernel: an ``@njit`` version looping over
trajectories and steps, and a numpy version looping over steps with the
trajectory axis vectorized. They perform the same floating-point operations
in the same order.

State layout: ``y[0:4, j]`` = (coordinate, momentum, Re alpha, Im alpha)
for trajectory j. ``dw[s, :, j]`` holds three standard-normal increments
already scaled by sqrt(dt): one mechanical, two optical quadratures.

Parameter vectors
-----------------
linear (vibrational and torsional share the same structure)::

    [inertia, omega_m**2, gamma_m, hbar*g, g, detuning, gamma0/2, drive,
     sigma_thermal, sigma_optical]

rotational::

    [inertia, gamma_m, 4*l*hbar*g, 2*l, g, detuning', gamma0/2, drive,
     torque, sigma_thermal, sigma_optical]

The kernels return ``(n_saved, status)``: status is -1 on success, otherwise
the global step index at which a non-finite value appeared.
"""

import math

import numpy as np

from ._accel import njit

INV_SQRT2 = 1.0 / math.sqrt(2.0)


@njit
def linear_chunk_numba(y, par, dt, dw, step0, stride, out, k0):
    inertia, w2, gm, hg, g, delta, hk, drive, s_th, s_op = (
        par[0], par[1], par[2], par[3], par[4], par[5], par[6], par[7], par[8], par[9])
    inv_sqrt2 = 0.7071067811865476
    nsteps = dw.shape[0]
    ntraj = y.shape[1]
    k = k0
    for j in range(ntraj):
        x = y[0, j]
        p = y[1, j]
        ar = y[2, j]
        ai = y[3, j]
        k = k0
        for s in range(nsteps):
            nth = s_th * dw[s, 0, j]
            nr = s_op * inv_sqrt2 * dw[s, 1, j]
            ni = s_op * inv_sqrt2 * dw[s, 2, j]
            # drift at the current point
            th = g * x - delta
            fx1 = p / inertia
            fp1 = -inertia * w2 * x - gm * p + hg * (ar * ar + ai * ai)
            fr1 = -hk * ar - th * ai + drive
            fi1 = -hk * ai + th * ar
            # predictor
            xp = x + fx1 * dt
            pp = p + fp1 * dt + nth
            rp = ar + fr1 * dt + nr
            ip = ai + fi1 * dt + ni
            # drift at the predicted point
            th = g * xp - delta
            fx2 = pp / inertia
            fp2 = -inertia * w2 * xp - gm * pp + hg * (rp * rp + ip * ip)
            fr2 = -hk * rp - th * ip + drive
            fi2 = -hk * ip + th * rp
            x = x + 0.5 * (fx1 + fx2) * dt
            p = p + 0.5 * (fp1 + fp2) * dt + nth
            ar = ar + 0.5 * (fr1 + fr2) * dt + nr
            ai = ai + 0.5 * (fi1 + fi2) * dt + ni
            if (step0 + s + 1) % stride == 0:
                out[k, 0, j] = x
                out[k, 1, j] = p
                out[k, 2, j] = ar
                out[k, 3, j] = ai
                k += 1
                if not math.isfinite(x + p + ar + ai):
                    return k, step0 + s + 1
        if not math.isfinite(x + p + ar + ai):
            return k, step0 + nsteps
        y[0, j] = x
        y[1, j] = p
        y[2, j] = ar
        y[3, j] = ai
    return k, -1


def linear_chunk_numpy(y, par, dt, dw, step0, stride, out, k0):
    inertia, w2, gm, hg, g, delta, hk, drive, s_th, s_op = (float(v) for v in par)
    x, p, ar, ai = (y[i].copy() for i in range(4))
    k = k0
    for s in range(dw.shape[0]):
        nth = s_th * dw[s, 0]
        nr = s_op * INV_SQRT2 * dw[s, 1]
        ni = s_op * INV_SQRT2 * dw[s, 2]
        th = g * x - delta
        fx1 = p / inertia
        fp1 = -inertia * w2 * x - gm * p + hg * (ar * ar + ai * ai)
        fr1 = -hk * ar - th * ai + drive
        fi1 = -hk * ai + th * ar
        xp = x + fx1 * dt
        pp = p + fp1 * dt + nth
        rp = ar + fr1 * dt + nr
        ip = ai + fi1 * dt + ni
        th = g * xp - delta
        fx2 = pp / inertia
        fp2 = -inertia * w2 * xp - gm * pp + hg * (rp * rp + ip * ip)
        fr2 = -hk * rp - th * ip + drive
        fi2 = -hk * ip + th * rp
        x = x + 0.5 * (fx1 + fx2) * dt
        p = p + 0.5 * (fp1 + fp2) * dt + nth
        ar = ar + 0.5 * (fr1 + fr2) * dt + nr
        ai = ai + 0.5 * (fi1 + fi2) * dt + ni
        if (step0 + s + 1) % stride == 0:
            out[k, 0] = x
            out[k, 1] = p
            out[k, 2] = ar
            out[k, 3] = ai
            k += 1
            if not np.all(np.isfinite(x + p + ar + ai)):
                return k, step0 + s + 1
    if not np.all(np.isfinite(x + p + ar + ai)):
        return k, step0 + dw.shape[0]
    y[0], y[1], y[2], y[3] = x, p, ar, ai
    return k, -1


@njit
def rotational_chunk_numba(y, par, dt, dw, step0, stride, out, k0):
    inertia, gm, c_torque, two_l, g, delta, hk, drive, tau, s_th, s_op = (
        par[0], par[1], par[2], par[3], par[4], par[5], par[6], par[7], par[8], par[9], par[10])
    inv_sqrt2 = 0.7071067811865476
    nsteps = dw.shape[0]
    ntraj = y.shape[1]
    k = k0
    for j in range(ntraj):
        x = y[0, j]
        p = y[1, j]
        ar = y[2, j]
        ai = y[3, j]
        k = k0
        for s in range(nsteps):
            nth = s_th * dw[s, 0, j]
            nr = s_op * inv_sqrt2 * dw[s, 1, j]
            ni = s_op * inv_sqrt2 * dw[s, 2, j]
            a = two_l * x
            th = delta - g * math.cos(a)
            fx1 = p / inertia
            fp1 = -gm * p + c_torque * math.sin(a) * (ar * ar + ai * ai) + tau
            fr1 = -hk * ar - th * ai + drive
            fi1 = -hk * ai + th * ar
            xp = x + fx1 * dt
            pp = p + fp1 * dt + nth
            rp = ar + fr1 * dt + nr
            ip = ai + fi1 * dt + ni
            a = two_l * xp
            th = delta - g * math.cos(a)
            fx2 = pp / inertia
            fp2 = -gm * pp + c_torque * math.sin(a) * (rp * rp + ip * ip) + tau
            fr2 = -hk * rp - th * ip + drive
            fi2 = -hk * ip + th * rp
            x = x + 0.5 * (fx1 + fx2) * dt
            p = p + 0.5 * (fp1 + fp2) * dt + nth
            ar = ar + 0.5 * (fr1 + fr2) * dt + nr
            ai = ai + 0.5 * (fi1 + fi2) * dt + ni
            if (step0 + s + 1) % stride == 0:
                out[k, 0, j] = x
                out[k, 1, j] = p
                out[k, 2, j] = ar
                out[k, 3, j] = ai
                k += 1
                if not math.isfinite(x + p + ar + ai):
                    return k, step0 + s + 1
        if not math.isfinite(x + p + ar + ai):
            return k, step0 + nsteps
        y[0, j] = x
        y[1, j] = p
        y[2, j] = ar
        y[3, j] = ai
    return k, -1


def rotational_chunk_numpy(y, par, dt, dw, step0, stride, out, k0):
    inertia, gm, c_torque, two_l, g, delta, hk, drive, tau, s_th, s_op = (float(v) for v in par)
    x, p, ar, ai = (y[i].copy() for i in range(4))
    k = k0
    for s in range(dw.shape[0]):
        nth = s_th * dw[s, 0]
        nr = s_op * INV_SQRT2 * dw[s, 1]
        ni = s_op * INV_SQRT2 * dw[s, 2]
        a = two_l * x
        th = delta - g * np.cos(a)
        fx1 = p / inertia
        fp1 = -gm * p + c_torque * np.sin(a) * (ar * ar + ai * ai) + tau
        fr1 = -hk * ar - th * ai + drive
        fi1 = -hk * ai + th * ar
        xp = x + fx1 * dt
        pp = p + fp1 * dt + nth
        rp = ar + fr1 * dt + nr
        ip = ai + fi1 * dt + ni
        a = two_l * xp
        th = delta - g * np.cos(a)
        fx2 = pp / inertia
        fp2 = -gm * pp + c_torque * np.sin(a) * (rp * rp + ip * ip) + tau
        fr2 = -hk * rp - th * ip + drive
        fi2 = -hk * ip + th * rp
        x = x + 0.5 * (fx1 + fx2) * dt
        p = p + 0.5 * (fp1 + fp2) * dt + nth
        ar = ar + 0.5 * (fr1 + fr2) * dt + nr
        ai = ai + 0.5 * (fi1 + fi2) * dt + ni
        if (step0 + s + 1) % stride == 0:
            out[k, 0] = x
            out[k, 1] = p
            out[k, 2] = ar
            out[k, 3] = ai
            k += 1
            if not np.all(np.isfinite(x + p + ar + ai)):
                return k, step0 + s + 1
    if not np.all(np.isfinite(x + p + ar + ai)):
        return k, step0 + dw.shape[0]
    y[0], y[1], y[2], y[3] = x, p, ar, ai
    return k, -1


KERNELS = {
    ("linear", "numba"): linear_chunk_numba,
    ("linear", "numpy"): linear_chunk_numpy,
    ("rotational", "numba"): rotational_chunk_numba,
    ("rotational", "numpy"): rotational_chunk_numpy,
}
