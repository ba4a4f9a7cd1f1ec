"""Numba-compiled inner loops for motion synthesis and time integration.

Each kernel is a pure function of its arguments with a fixed sequential
operation order, so results are bit-reproducible regardless of process or
thread count.
"""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def synth_core(n, dt, t_imp, omega_imp, zeta, q, u):
    """Modulated filtered white-noise synthesis.

    Output sample k at t = k*dt is q[k] * sum_i h_i(t) u[i] / sqrt(sum_i
    h_i(t)^2) over impulses with t_imp[i] < t, where h_i is the SDOF
    pseudo-acceleration impulse response with frequency omega_imp[i] frozen
    at the impulse time.  Each impulse's damped sinusoid is advanced by a
    per-step rotation instead of re-evaluating exp/sin at every lag.
    """
    out = np.zeros(n)
    m = t_imp.shape[0]
    sq = math.sqrt(1.0 - zeta * zeta)
    s = np.zeros(m)       # e^(-zeta w lag) sin(wd lag)
    c = np.zeros(m)       # e^(-zeta w lag) cos(wd lag)
    decay = np.zeros(m)   # per-step attenuation e^(-zeta w dt)
    cosd = np.zeros(m)    # cos(wd dt)
    sind = np.zeros(m)    # sin(wd dt)
    amp = np.zeros(m)     # w / sqrt(1 - zeta^2)
    n_active = 0
    for k in range(n):
        t = k * dt
        for i in range(n_active):
            sn = decay[i] * (sind[i] * c[i] + cosd[i] * s[i])
            cn = decay[i] * (cosd[i] * c[i] - sind[i] * s[i])
            s[i] = sn
            c[i] = cn
        while n_active < m and t_imp[n_active] < t:
            i = n_active
            lag = t - t_imp[i]
            w = omega_imp[i]
            wd = w * sq
            e = math.exp(-zeta * w * lag)
            s[i] = e * math.sin(wd * lag)
            c[i] = e * math.cos(wd * lag)
            decay[i] = math.exp(-zeta * w * dt)
            sind[i] = math.sin(wd * dt)
            cosd[i] = math.cos(wd * dt)
            amp[i] = w / sq
            n_active += 1
        num = 0.0
        den = 0.0
        for i in range(n_active):
            h = amp[i] * s[i]
            num += h * u[i]
            den += h * h
        if den > 0.0:
            out[k] = q[k] * num / math.sqrt(den)
    return out


@njit(cache=True)
def bilinear_force(d, up, k, h_kin, fy, b):
    """Return-mapping for the kinematic-hardening bilinear spring.

    d is the total storey drift, up the committed plastic drift.  Returns
    (force, tangent, new plastic drift).
    """
    f_trial = k * (d - up)
    back = h_kin * up
    phi = abs(f_trial - back) - fy
    if phi > 0.0:
        sgn = 1.0 if f_trial - back > 0.0 else -1.0
        dgamma = phi / (k + h_kin)
        return f_trial - k * dgamma * sgn, b * k, up + dgamma * sgn
    return f_trial, k, up


@njit(cache=True)
def newmark_bilinear(masses, stiffs, uy, b, a0, a1, ag, dt, nsub, tol, maxit):
    """Average-acceleration Newmark with Newton iteration per sub-step.

    Shear building with storey springs bilinear in the inter-storey drift
    (per-storey yield displacement uy) and Rayleigh damping C = a0*M +
    a1*K_elastic held constant.  ag is the base acceleration in g;
    internal units are SI.  Histories are sampled back onto the input
    grid.  Returns (disp, vel, abs_acc_g, status); status = -step flags
    Newton failure at that input step.
    """
    grav = 9.81
    ns = masses.shape[0]
    nstep = ag.shape[0]
    h = dt / nsub
    beta = 0.25
    gamma = 0.5
    c0 = 1.0 / (beta * h * h)
    c1 = gamma / (beta * h)
    c2 = 1.0 / (beta * h)
    c3 = 0.5 / beta - 1.0

    k_el = np.zeros((ns, ns))
    for j in range(ns):
        k_el[j, j] += stiffs[j]
        if j + 1 < ns:
            k_el[j, j] += stiffs[j + 1]
            k_el[j, j + 1] -= stiffs[j + 1]
            k_el[j + 1, j] -= stiffs[j + 1]

    h_kin = b * stiffs / (1.0 - b)
    fy = stiffs * uy
    f_ref = fy[0]
    for j in range(ns):
        if fy[j] < f_ref:
            f_ref = fy[j]

    u = np.zeros(ns)
    v = np.zeros(ns)
    acc = np.full(ns, -ag[0] * grav)
    up = np.zeros(ns)
    up_new = np.zeros(ns)
    un = np.zeros(ns)
    an = np.zeros(ns)
    vn = np.zeros(ns)
    disp = np.zeros((nstep, ns))
    vel = np.zeros((nstep, ns))
    acc_abs = np.zeros((nstep, ns))

    for step in range(1, nstep):
        for ss in range(nsub):
            frac = (ss + 1.0) / nsub
            agn = (ag[step - 1] + (ag[step] - ag[step - 1]) * frac) * grav
            ref = f_ref
            for j in range(ns):
                if abs(masses[j] * agn) > ref:
                    ref = abs(masses[j] * agn)
            un[:] = u
            converged = False
            for it in range(maxit):
                resid = np.zeros(ns)
                ktan = np.zeros((ns, ns))
                for j in range(ns):
                    d_lower = un[j - 1] if j > 0 else 0.0
                    f, kt, upj = bilinear_force(un[j] - d_lower, up[j],
                                                stiffs[j], h_kin[j], fy[j], b)
                    up_new[j] = upj
                    resid[j] += f
                    ktan[j, j] += kt
                    if j > 0:
                        resid[j - 1] -= f
                        ktan[j - 1, j - 1] += kt
                        ktan[j, j - 1] -= kt
                        ktan[j - 1, j] -= kt
                for j in range(ns):
                    an[j] = c0 * (un[j] - u[j]) - c2 * v[j] - c3 * acc[j]
                    vn[j] = v[j] + h * ((1.0 - gamma) * acc[j] + gamma * an[j])
                rmax = 0.0
                for j in range(ns):
                    cv = a0 * masses[j] * vn[j]
                    for l in range(ns):
                        cv += a1 * k_el[j, l] * vn[l]
                    resid[j] += masses[j] * an[j] + cv + masses[j] * agn
                    if abs(resid[j]) > rmax:
                        rmax = abs(resid[j])
                if it >= 1 and rmax <= tol * ref:
                    converged = True
                    break
                jac = ktan + c0 * np.diag(masses) \
                    + c1 * (a0 * np.diag(masses) + a1 * k_el)
                dun = np.linalg.solve(jac, -resid)
                un = un + dun
            if not converged:
                return disp, vel, acc_abs, -step
            for j in range(ns):
                up[j] = up_new[j]
                u[j] = un[j]
                v[j] = vn[j]
                acc[j] = an[j]
        disp[step] = u
        vel[step] = v
        for j in range(ns):
            acc_abs[step, j] = acc[j] / grav + ag[step]
    return disp, vel, acc_abs, 0


@njit(cache=True)
def newmark_sdof(ag, dt, nsub, omega, zeta):
    """Linear unit-mass SDOF by average-acceleration Newmark.

    ag in g.  Returns (relative displacement in m, absolute acceleration
    in g) on the input grid.
    """
    grav = 9.81
    nstep = ag.shape[0]
    h = dt / nsub
    beta = 0.25
    gamma = 0.5
    c0 = 1.0 / (beta * h * h)
    c1 = gamma / (beta * h)
    c2 = 1.0 / (beta * h)
    c3 = 0.5 / beta - 1.0
    k = omega * omega
    c = 2.0 * zeta * omega
    keff = k + c0 + c1 * c
    u = 0.0
    v = 0.0
    a = -ag[0] * grav
    disp = np.zeros(nstep)
    acc_abs = np.zeros(nstep)
    for step in range(1, nstep):
        for ss in range(nsub):
            frac = (ss + 1.0) / nsub
            p = -(ag[step - 1] + (ag[step] - ag[step - 1]) * frac) * grav
            peff = p + c0 * u + c2 * v + c3 * a \
                + c * (c1 * u + (gamma / beta - 1.0) * v
                       + h * (0.5 * gamma / beta - 1.0) * a)
            un = peff / keff
            an = c0 * (un - u) - c2 * v - c3 * a
            vn = v + h * ((1.0 - gamma) * a + gamma * an)
            u = un
            v = vn
            a = an
        disp[step] = u
        acc_abs[step] = a / grav + ag[step]
    return disp, acc_abs
