"""Fused per-node curvature kernels for the time integrator.

Same arithmetic as ``geometry.curvature_kernel_numpy``; one pass over the
nodes instead of ~40 temporary arrays.  The numpy version stays the
reference and the test-suite checks the two agree.
"""
import numpy as np
from numba import njit


@njit(cache=True)
def circle_kernel(phi, u, h):
    n = phi.shape[0]
    v = np.empty(n)
    grad_sq = np.empty(n)
    kappa = np.empty((n, 1))
    c1 = 1.0 / (12.0 * h)
    c2 = 1.0 / (12.0 * h * h)
    for i in range(n):
        fm2 = phi[(i - 2) % n]
        fm1 = phi[(i - 1) % n]
        fp1 = phi[(i + 1) % n]
        fp2 = phi[(i + 2) % n]
        p_t = (8.0 * (fp1 - fm1) - (fp2 - fm2)) * c1
        p_tt = (16.0 * (fp1 + fm1) - (fp2 + fm2) - 30.0 * phi[i]) * c2
        g = p_t * p_t
        v2 = 1.0 + g
        vi = np.sqrt(v2)
        v[i] = vi
        grad_sq[i] = g
        kappa[i, 0] = (v2 - p_tt) / (v2 * vi * u[i])
    return v, grad_sq, kappa


@njit(cache=True)
def latlong_kernel(phi, u, h_t, h_l, sin_t, cos_t):
    nt, nl = phi.shape
    half = nl // 2
    v = np.empty((nt, nl))
    grad_sq = np.empty((nt, nl))
    kappa = np.empty((nt, nl, 2))
    inv2t = 1.0 / (2.0 * h_t)
    inv2l = 1.0 / (2.0 * h_l)
    invtt = 1.0 / (h_t * h_t)
    invll = 1.0 / (h_l * h_l)
    kp_of = np.empty(nl, np.int64)
    km_of = np.empty(nl, np.int64)
    opp = np.empty(nl, np.int64)
    for k in range(nl):
        kp_of[k] = k + 1 if k + 1 < nl else 0
        km_of[k] = k - 1 if k > 0 else nl - 1
        opp[k] = k + half if k + half < nl else k + half - nl
    for j in range(nt):
        s = sin_t[j]
        c = cos_t[j]
        inv_s = 1.0 / s
        cot = c * inv_s
        for k in range(nl):
            kp = kp_of[k]
            km = km_of[k]
            # neighbours across the poles live at longitude + pi
            if j == 0:
                jn, kn, knp, knm = 0, opp[k], opp[kp], opp[km]
            else:
                jn, kn, knp, knm = j - 1, k, kp, km
            if j == nt - 1:
                js, ks, ksp, ksm = nt - 1, opp[k], opp[kp], opp[km]
            else:
                js, ks, ksp, ksm = j + 1, k, kp, km
            f = phi[j, k]
            f_dn = phi[jn, kn]
            f_up = phi[js, ks]
            p_t = (f_up - f_dn) * inv2t
            p_tt = (f_up - 2.0 * f + f_dn) * invtt
            p_l = (phi[j, kp] - phi[j, km]) * inv2l
            p_ll = (phi[j, kp] - 2.0 * f + phi[j, km]) * invll
            pl_up = (phi[js, ksp] - phi[js, ksm]) * inv2l
            pl_dn = (phi[jn, knp] - phi[jn, knm]) * inv2l
            p_tl = (pl_up - pl_dn) * inv2t

            a1 = p_t
            a2 = p_l * inv_s
            h11 = p_tt
            h12 = (p_tl - cot * p_l) * inv_s
            h22 = (p_ll + s * c * p_t) * inv_s * inv_s
            g = a1 * a1 + a2 * a2
            vi = np.sqrt(1.0 + g)
            iv = 1.0 / vi
            b11 = (1.0 - h11 + a1 * a1) * iv
            b12 = (a1 * a2 - h12) * iv
            b22 = (1.0 - h22 + a2 * a2) * iv
            w = iv / (1.0 + vi)
            s11 = 1.0 - w * a1 * a1
            s12 = -w * a1 * a2
            s22 = 1.0 - w * a2 * a2
            m11 = b11 * s11 + b12 * s12
            m12 = b11 * s12 + b12 * s22
            m21 = b12 * s11 + b22 * s12
            m22 = b12 * s12 + b22 * s22
            c11 = s11 * m11 + s12 * m21
            c12 = s11 * m12 + s12 * m22
            c22 = s12 * m12 + s22 * m22
            mid = 0.5 * (c11 + c22)
            d = 0.5 * (c11 - c22)
            rad = np.sqrt(d * d + c12 * c12)
            iu = 1.0 / u[j, k]
            v[j, k] = vi
            grad_sq[j, k] = g
            kappa[j, k, 0] = (mid - rad) * iu
            kappa[j, k, 1] = (mid + rad) * iu
    return v, grad_sq, kappa
