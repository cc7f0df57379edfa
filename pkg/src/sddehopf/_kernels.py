"""Vectorised Euler-Maruyama step kernels (numba).

These reproduce, column for column, what the single-path reference
integrators in ``sdde`` and ``reduced`` compute: same operation order, same
interpolation formula, same phase reduction.  A test pins the agreement.

State is carried across kernel calls so Wiener increments can be streamed in
blocks.  The history ring holds the last m+1 samples per path; the row of
global sample index g is g mod (m+1).
"""
from __future__ import annotations

import numba as nb
import numpy as np

SIG_CACHE = True


@nb.njit(cache=SIG_CACHE, nogil=True)
def _delayed(ring, cap, g, j, a, p):
    """Value a*dt before sample g-j: (1-a) x[g-j] + a x[g-j-1]."""
    r0 = (g - j) % cap
    if a == 0.0:
        return ring[r0, p]
    r1 = (g - j - 1) % cap
    v0 = ring[r0, p]
    return v0 + a * (ring[r1, p] - v0)


@nb.njit(cache=SIG_CACHE, nogil=True)
def full_block(
    ring, x, alive, blow_step, sup_abs, tau,
    g_start, nb_steps, dW, m,
    l0_j, l0_a, l0_w,
    n1_j, n1_a, n1_w,
    n3_j, n3_a, n3_w,
    lL_j, lL_a, lL_w, sigma, mult,
    inv_eps2, dt, guard, thr,
):
    """One block of full-system steps for all paths.

    tau[p] is NaN until |X| first reaches thr; the crossing is refined by
    linear interpolation inside the step.  thr <= 0 disables tracking.
    Paths freeze on overflow (blow_step records the step, x keeps the last
    finite value).
    """
    cap = m + 1
    n_paths = x.size
    for s in range(nb_steps):
        g = g_start + s
        for p in range(n_paths):
            if not alive[p]:
                continue
            l0v = 0.0
            for k in range(l0_j.size):
                l0v += l0_w[k] * _delayed(ring, cap, g, l0_j[k], l0_a[k], p)
            gv = 0.0
            for k in range(n1_j.size):
                gv += n1_w[k] * _delayed(ring, cap, g, n1_j[k], n1_a[k], p)
            for k in range(n3_j.size):
                v = _delayed(ring, cap, g, n3_j[k], n3_a[k], p)
                gv += n3_w[k] * (v * v * v)
            if mult:
                dv = 0.0
                for k in range(lL_j.size):
                    dv += lL_w[k] * _delayed(ring, cap, g, lL_j[k], lL_a[k], p)
            else:
                dv = sigma
            xn = x[p] + dt * (inv_eps2 * l0v + gv) + dv * dW[s, p]
            axn = abs(xn)
            if axn > sup_abs[p]:
                sup_abs[p] = axn
            if thr > 0.0 and tau[p] != tau[p] and axn >= thr:
                ax0 = abs(x[p])
                frac = 1.0
                if axn > ax0:
                    frac = (thr - ax0) / (axn - ax0)
                    if frac < 0.0:
                        frac = 0.0
                tau[p] = (g - m + frac) * dt
            if axn > guard:
                alive[p] = False
                blow_step[p] = g + 1 - m
                ring[(g + 1) % cap, p] = x[p]
                continue
            x[p] = xn
            ring[(g + 1) % cap, p] = xn


@nb.njit(cache=SIG_CACHE, nogil=True)
def coupled_block(
    ring, x, zh1, zh2, zt1, zt2, alive, blow_step, blow_comp,
    sup_beta, sup_errh, sup_errt, sup_abs,
    g_start, nb_steps, dW, m,
    l0_j, l0_a, l0_w,
    n1_j, n1_a, n1_w, d1,
    n3_j, n3_a, n3_w, d3,
    lL_j, lL_a, lL_w, dL, sigma, mult,
    y_n1, y_n3, y_l1, y0,
    psi1, psi2, dphi, inv_eps2, dt, guard,
    ck_stride, a1, a2, phi1g, phi2g, y_grid,
    ck_z1, ck_z2, ck_alpha, ck_ynorm, ck_phiz, ck_phizh,
):
    """Full system + both reduced processes on one Wiener stream.

    The reduced processes integrate in the rotating frame: phase
    phi_g = (g - m) * dphi mod 2pi, dphi = omega dt / eps^2.  zh sees the
    deterministic stable transient through the atom tables y_* (rows indexed
    by step, zero beyond their length); zt ignores it.

    Checkpoints fire every ck_stride steps; row ci of the ck_* arrays takes
    the projection z of the current segment, alpha = 0.5 |e^{-tB} z - zh|^2,
    the sup-norms over the theta grid of the stable remainder minus the
    transient (Y-script), of Phi z, and of Phi e^{tB} zh.
    """
    cap = m + 1
    n_paths = x.size
    two_pi = 2.0 * np.pi
    n_y0 = y0.size
    n_y1 = y_n1.shape[0]
    n_y3 = y_n3.shape[0]
    n_yl = y_l1.shape[0]
    yg_rows = y_grid.shape[0]
    for s in range(nb_steps):
        g = g_start + s
        phi = np.fmod((g - m) * dphi, two_pi)
        c0 = np.cos(phi)
        s0 = np.sin(phi)
        p1 = c0 * psi1 - s0 * psi2
        p2 = s0 * psi1 + c0 * psi2
        phin = np.fmod((g + 1 - m) * dphi, two_pi)
        cn = np.cos(phin)
        sn = np.sin(phin)
        y0n = y0[g + 1 - m] if (g + 1 - m) < n_y0 else 0.0
        for p in range(n_paths):
            if not alive[p]:
                continue
            # --- full system ---
            l0v = 0.0
            for k in range(l0_j.size):
                l0v += l0_w[k] * _delayed(ring, cap, g, l0_j[k], l0_a[k], p)
            gv = 0.0
            for k in range(n1_j.size):
                gv += n1_w[k] * _delayed(ring, cap, g, n1_j[k], n1_a[k], p)
            for k in range(n3_j.size):
                v = _delayed(ring, cap, g, n3_j[k], n3_a[k], p)
                gv += n3_w[k] * (v * v * v)
            if mult:
                dv = 0.0
                for k in range(lL_j.size):
                    dv += lL_w[k] * _delayed(ring, cap, g, lL_j[k], lL_a[k], p)
            else:
                dv = sigma
            xn = x[p] + dt * (inv_eps2 * l0v + gv) + dv * dW[s, p]

            # --- reduced drift/diffusion in the rotating frame ---
            step_idx = g - m
            gh = 0.0
            gt = 0.0
            for k in range(n1_j.size):
                ck = np.cos(phi + d1[k])
                sk = np.sin(phi + d1[k])
                yv = y_n1[step_idx, k] if step_idx < n_y1 else 0.0
                gh += n1_w[k] * (ck * zh1[p] + sk * zh2[p] + yv)
                gt += n1_w[k] * (ck * zt1[p] + sk * zt2[p])
            for k in range(n3_j.size):
                ck = np.cos(phi + d3[k])
                sk = np.sin(phi + d3[k])
                yv = y_n3[step_idx, k] if step_idx < n_y3 else 0.0
                vh = ck * zh1[p] + sk * zh2[p] + yv
                vt = ck * zt1[p] + sk * zt2[p]
                gh += n3_w[k] * (vh * vh * vh)
                gt += n3_w[k] * (vt * vt * vt)
            if mult:
                dh = 0.0
                dtl = 0.0
                for k in range(lL_j.size):
                    ck = np.cos(phi + dL[k])
                    sk = np.sin(phi + dL[k])
                    yv = y_l1[step_idx, k] if step_idx < n_yl else 0.0
                    dh += lL_w[k] * (ck * zh1[p] + sk * zh2[p] + yv)
                    dtl += lL_w[k] * (ck * zt1[p] + sk * zt2[p])
            else:
                dh = sigma
                dtl = sigma
            dwi = dW[s, p]
            zh1n = zh1[p] + dt * (p1 * gh) + p1 * dh * dwi
            zh2n = zh2[p] + dt * (p2 * gh) + p2 * dh * dwi
            zt1n = zt1[p] + dt * (p1 * gt) + p1 * dtl * dwi
            zt2n = zt2[p] + dt * (p2 * gt) + p2 * dtl * dwi

            # --- blowup bookkeeping ---
            comp = 0
            if abs(xn) > guard:
                comp |= 1
            if abs(zh1n) + abs(zh2n) > guard:
                comp |= 2
            if abs(zt1n) + abs(zt2n) > guard:
                comp |= 4
            if comp != 0:
                alive[p] = False
                blow_step[p] = g + 1 - m
                blow_comp[p] = comp
                ring[(g + 1) % cap, p] = x[p]
                continue
            x[p] = xn
            zh1[p] = zh1n
            zh2[p] = zh2n
            zt1[p] = zt1n
            zt2[p] = zt2n
            ring[(g + 1) % cap, p] = xn
            if abs(xn) > sup_abs[p]:
                sup_abs[p] = abs(xn)

            # --- running diagnostics at g+1 ---
            b = 0.5 * ((zt1n - zh1n) ** 2 + (zt2n - zh2n) ** 2)
            if b > sup_beta[p]:
                sup_beta[p] = b
            rec_h = cn * zh1n + sn * zh2n + y0n
            eh = abs(xn - rec_h)
            if eh > sup_errh[p]:
                sup_errh[p] = eh
            rec_t = cn * zt1n + sn * zt2n + y0n
            et = abs(xn - rec_t)
            if et > sup_errt[p]:
                sup_errt[p] = et

        # --- checkpoint at g+1 ---
        gp = g + 1 - m
        if gp % ck_stride == 0:
            ci = gp // ck_stride
            for p in range(n_paths):
                if not alive[p]:
                    ck_z1[ci, p] = np.nan
                    ck_z2[ci, p] = np.nan
                    ck_alpha[ci, p] = np.nan
                    ck_ynorm[ci, p] = np.nan
                    ck_phiz[ci, p] = np.nan
                    ck_phizh[ci, p] = np.nan
                    continue
                z1p = 0.0
                z2p = 0.0
                for j in range(cap):
                    v = ring[(gp + j) % cap, p]  # sample g+1-m+j
                    z1p += a1[j] * v
                    z2p += a2[j] * v
                mz1 = cn * z1p - sn * z2p
                mz2 = sn * z1p + cn * z2p
                ck_z1[ci, p] = z1p
                ck_z2[ci, p] = z2p
                ck_alpha[ci, p] = 0.5 * ((mz1 - zh1[p]) ** 2 + (mz2 - zh2[p]) ** 2)
                u1 = cn * zh1[p] + sn * zh2[p]
                u2 = -sn * zh1[p] + cn * zh2[p]
                sy = 0.0
                spz = 0.0
                spzh = 0.0
                for j in range(cap):
                    v = ring[(gp + j) % cap, p]
                    bz = phi1g[j] * z1p + phi2g[j] * z2p
                    yg = y_grid[ci, j] if ci < yg_rows else 0.0
                    w1 = abs(v - bz - yg)
                    if w1 > sy:
                        sy = w1
                    if abs(bz) > spz:
                        spz = abs(bz)
                    w2 = abs(phi1g[j] * u1 + phi2g[j] * u2)
                    if w2 > spzh:
                        spzh = w2
                ck_ynorm[ci, p] = sy
                ck_phiz[ci, p] = spz
                ck_phizh[ci, p] = spzh
