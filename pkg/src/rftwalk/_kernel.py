"""Compiled time-stepping loop used by :func:`rftwalk.sim.simulate`.

Mirrors the numpy reference path in ``sim.py`` operation for operation;
``tests/test_sim.py`` checks the two against each other.
"""
import math

from numba import njit

HALF_PI = 0.5 * math.pi

OK = 0
DIVERGED = 1

# columns of the per-step foot kinematics rows
AX, AZ, AVX, AVZ, THETA, OMEGA = range(6)
# columns of the foot-frame plate table
CX, CZ, BETA, AREA = range(4)


@njit(cache=True, nogil=True)
def _cell(x, x0, dx, n):
    u = (x - x0) / dx
    if u < 0.0:
        u = 0.0
    elif u > n - 1.0:
        u = n - 1.0
    r = math.floor(u + 0.5)
    if abs(u - r) < 1e-9:
        u = r
    i = int(math.floor(u))
    if i > n - 2:
        i = n - 2
    return i, u - i


@njit(cache=True, nogil=True)
def lookup(beta, gamma, b0, db, g0, dg, axt, azt, no_tension):
    """Unscaled stress for a plate slope ``beta`` in (-pi/2, pi/2] and full motion angle ``gamma``."""
    sign = 1.0
    if abs(gamma) > HALF_PI:
        sign = -1.0
        if gamma > 0:
            gamma = math.pi - gamma
        else:
            gamma = -math.pi - gamma
        beta = -beta
        if beta <= -HALF_PI:
            beta += math.pi
    i, fb = _cell(beta, b0, db, axt.shape[0])
    j, fg = _cell(gamma, g0, dg, axt.shape[1])
    w00 = (1 - fb) * (1 - fg)
    w10 = fb * (1 - fg)
    w01 = (1 - fb) * fg
    w11 = fb * fg
    ax = w00 * axt[i, j] + w10 * axt[i + 1, j] + w01 * axt[i, j + 1] + w11 * axt[i + 1, j + 1]
    az = w00 * azt[i, j] + w10 * azt[i + 1, j] + w01 * azt[i, j + 1] + w11 * azt[i + 1, j + 1]
    ax = sign * ax
    if no_tension and gamma > 0 and az < 0:
        az = 0.0
    return ax, az


@njit(cache=True, nogil=True)
def foot_forces(kin, plates, mem, rx, rz, vx, vz, b0, db, g0, dg, axt, azt,
                no_tension, eps_v):
    """Total force and power on one foot, before scaling by ``zeta``.

    ``mem`` is an (N, 2) array holding each plate's last velocity at or
    above ``eps_v``; slower plates take their motion angle from it.  It is
    updated in place.
    """
    phi = kin[THETA] - HALF_PI
    c = math.cos(phi)
    s = math.sin(phi)
    pz = rz + kin[AZ]
    bvx = vx + kin[AVX]
    bvz = vz + kin[AVZ]
    om = kin[OMEGA]
    fx_tot = 0.0
    fz_tot = 0.0
    power = 0.0
    for i in range(plates.shape[0]):
        ox = c * plates[i, CX] - s * plates[i, CZ]
        oz = s * plates[i, CX] + c * plates[i, CZ]
        pvx = bvx + om * -oz
        pvz = bvz + om * ox
        if math.sqrt(pvx * pvx + pvz * pvz) >= eps_v:
            mem[i, 0] = pvx
            mem[i, 1] = pvz
        zc = oz + pz
        if zc >= 0.0:
            continue
        gamma = math.atan2(mem[i, 1], mem[i, 0])
        # rotating a plate shifts its slope angle by phi
        beta = plates[i, BETA] + phi
        if beta > HALF_PI:
            beta -= math.pi
        elif beta <= -HALF_PI:
            beta += math.pi
        if beta > HALF_PI:
            beta -= math.pi
        elif beta <= -HALF_PI:
            beta += math.pi
        ax, az = lookup(beta, gamma, b0, db, g0, dg, axt, azt, no_tension)
        depth = -zc
        fx = ax * depth * plates[i, AREA]
        fz = az * depth * plates[i, AREA]
        fx_tot += fx
        fz_tot += fz
        power += fx * pvx + fz * pvz
    return fx_tot, fz_tot, power


@njit(cache=True, nogil=True)
def run(kin_l, kin_r, plates_l, plates_r, mem_l, mem_r, gsteps, n_settle, stride,
        r0, v0, M, dt, b0, db, g0, dg, axt, azt, zeta, no_tension, eps_v,
        log, settle_log):
    """Integrate the COM; returns (status, failing step, peak |power|, W_l, W_r).

    ``kin_*`` hold one row per step (plus one for the final state);
    ``log`` receives the gait-phase samples, ``settle_log`` (t, z) during
    settling.  Log columns: t x z vx vz fx_l fz_l fx_r fz_r p_l p_r w_l w_r.
    """
    n_total = gsteps.shape[0]
    rx, rz = r0[0], r0[1]
    vx, vz = v0[0], v0[1]
    w_l = 0.0
    w_r = 0.0
    pl_sum = 0.0
    pr_sum = 0.0
    p_peak = 0.0
    for j in range(n_total + 1):
        gxl, gzl, ql = foot_forces(kin_l[j], plates_l, mem_l, rx, rz, vx, vz, b0, db, g0, dg,
                                   axt, azt, no_tension, eps_v)
        gxr, gzr, qr = foot_forces(kin_r[j], plates_r, mem_r, rx, rz, vx, vz, b0, db, g0, dg,
                                   axt, azt, no_tension, eps_v)
        # zeta applied once to each sum keeps forces exactly linear in it
        fxl, fzl, pl = zeta * gxl, zeta * gzl, zeta * ql
        fxr, fzr, pr = zeta * gxr, zeta * gzr, zeta * qr
        i = j - n_settle
        if i < 0:
            if j % stride == 0:
                k = j // stride
                settle_log[k, 0] = (j - n_settle) * dt
                settle_log[k, 1] = rz
        else:
            p = abs(pl + pr)
            if p > p_peak:
                p_peak = p
            if i % stride == 0:
                k = i // stride
                log[k, 0] = i * dt
                log[k, 1] = rx
                log[k, 2] = rz
                log[k, 3] = vx
                log[k, 4] = vz
                log[k, 5] = fxl
                log[k, 6] = fzl
                log[k, 7] = fxr
                log[k, 8] = fzr
                log[k, 11] = w_l
                log[k, 12] = w_r
            if j == n_total:
                k = i // stride
                log[k, 9] = pl
                log[k, 10] = pr
                break
            pl_sum += pl
            pr_sum += pr
            if (i + 1) % stride == 0:
                k = i // stride
                log[k, 9] = pl_sum / stride
                log[k, 10] = pr_sum / stride
                pl_sum = 0.0
                pr_sum = 0.0
            w_l += pl * dt
            w_r += pr * dt
        if j == n_total:
            break
        axc = zeta * (gxl + gxr) / M
        azc = zeta * (gzl + gzr) / M - gsteps[j]
        rx_new = rx + vx * dt
        rz_new = rz + vz * dt
        vx = vx + axc * dt
        vz = vz + azc * dt
        rx = rx_new
        rz = rz_new
        if not (math.isfinite(rx) and math.isfinite(rz) and math.isfinite(vx) and math.isfinite(vz)):
            return DIVERGED, j, p_peak, w_l, w_r
    return OK, n_total, p_peak, w_l, w_r
