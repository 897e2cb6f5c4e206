"""Compiled inner loop for 1-D Gaussian-mixture chains.

This mirrors :func:`csgld.dynamics.csgld_iterate` operation for operation
(same RNG draw order, same update formulas) but runs in numba. Normals are
supplied by the caller in chunks so the stream comes from a numpy Generator.
"""
import math

import numpy as np
from numba import njit

# kind codes
SGLD, CSGLD, KSGLD, SGHMC, CSGHMC = range(5)
KIND_CODES = {"sgld": SGLD, "csgld": CSGLD, "ksgld": KSGLD, "sghmc": SGHMC, "csghmc": CSGHMC}

# float state slots
X, V, GRAD, ENERGY, WS, WSC, W, WC, CWS, CWSC, CW, CWC, MINMULT = range(13)
N_FSTATE = 13
# int state slots
J, COUNT, CLAMPS, NREC, NMARK, FIRSTNEG, DIVERGED, CCOUNT = range(8)
N_ISTATE = 8
# record columns
R_STEP, R_X, R_ENERGY, R_J, R_MULT, R_THETAJ, R_WEIGHT, R_RUN = range(8)
N_RCOL = 8


@njit(cache=True)
def _neumaier(total, comp, value):
    t = total + value
    if abs(total) >= abs(value):
        comp += (total - t) + value
    else:
        comp += (value - t) + total
    return t, comp


@njit(cache=True)
def mixture_eval(x, logw_const, mu, var, tau):
    """Energy and exact gradient of ``-tau * log sum_k w_k N(x; mu_k, sd_k^2)``."""
    K = mu.shape[0]
    a = np.empty(K)
    mx = -np.inf
    for c in range(K):
        a[c] = logw_const[c] - 0.5 * ((x - mu[c]) ** 2) / var[c]
        if a[c] > mx:
            mx = a[c]
    s = 0.0
    for c in range(K):
        s += math.exp(a[c] - mx)
    lse = math.log(s) + mx
    g = 0.0
    for c in range(K):
        g += math.exp(a[c] - lse) * ((x - mu[c]) / var[c])
    return -tau * lse, tau * g


@njit(cache=True)
def region_index(u, bounds):
    m1 = bounds.shape[0]
    lo, hi = 0, m1
    while lo < hi:
        mid = (lo + hi) // 2
        if bounds[mid] < u:
            lo = mid + 1
        else:
            hi = mid
    return lo + 1


@njit(cache=True)
def _multiplier(theta, j, zeta, tau, du):
    jp = j - 1 if j > 1 else 1
    return 1.0 + zeta * tau * (math.log(theta[j - 1]) - math.log(theta[jp - 1])) / du


@njit(cache=True)
def _floor(theta, floor):
    low = False
    for i in range(theta.shape[0]):
        if theta[i] < floor:
            low = True
    if not low:
        return 0
    tot = 0.0
    for i in range(theta.shape[0]):
        if theta[i] < floor:
            theta[i] = floor
        tot += theta[i]
    for i in range(theta.shape[0]):
        theta[i] /= tot
    return 1


@njit(cache=True)
def advance(k0, n, normals, kind, mix_logw, mix_mu, mix_var, fp, bounds, theta,
            fstate, istate, marks, mark_out, visits, rec_out, theta_out):
    """Run iterations ``k0+1 .. k0+n``; returns the index of the next unused normal.

    ``fp`` holds [tau, sigma, eps, lr_decay, lr_decay_every, zeta, beta, du,
    A, alpha, B, rho, floor, thinning, burn_in].
    """
    tau, sigma, eps0, decay, decay_every = fp[0], fp[1], fp[2], fp[3], fp[4]
    zeta, beta, du, A, alpha, B = fp[5], fp[6], fp[7], fp[8], fp[9], fp[10]
    rho, floor, thinning, burn_in = fp[11], fp[12], int(fp[13]), int(fp[14])
    contour = kind == CSGLD or kind == KSGLD or kind == CSGHMC
    adapt = kind == CSGLD or kind == CSGHMC
    momentum = kind == SGHMC or kind == CSGHMC
    m = theta.shape[0]
    x, v, g = fstate[X], fstate[V], fstate[GRAD]
    j = istate[J]
    pos = 0
    for k in range(k0 + 1, k0 + n + 1):
        mult = _multiplier(theta, j, zeta, tau, du) if contour else 1.0
        eps = eps0 if decay == 1.0 else eps0 * decay ** ((k - 1) // int(decay_every))
        e = normals[pos]
        pos += 1
        if momentum:
            v = beta * v - (eps * mult) * g + math.sqrt(2.0 * tau * eps * (1.0 - beta)) * e
            x = x + v
        else:
            x = x - (eps * mult) * g + math.sqrt(2.0 * tau * eps) * e
        if not (math.isfinite(x) and math.isfinite(v)):
            istate[DIVERGED] = k
            break
        u, g = mixture_eval(x, mix_logw, mix_mu, mix_var, tau)
        if sigma > 0:
            g = g + sigma * normals[pos]
            pos += 1
        if not (math.isfinite(u) and math.isfinite(g)):
            istate[DIVERGED] = k
            break
        j = region_index(u, bounds)
        omega = A / (k ** alpha + B) if adapt else 0.0
        if omega > 0:
            tj = theta[j - 1] ** zeta
            if rho > 0:
                tot = 0.0
                for i in range(m):
                    gain = omega * tj
                    if i >= j - 1:
                        gain += omega * omega * rho
                    ind = 1.0 if i == j - 1 else 0.0
                    theta[i] = theta[i] + gain * (ind - theta[i])
                    tot += theta[i]
                if abs(tot - 1.0) > 1e-15:
                    for i in range(m):
                        theta[i] /= tot
            else:
                gain = omega * tj
                for i in range(m):
                    theta[i] = theta[i] - gain * theta[i]
                theta[j - 1] += gain
            istate[CLAMPS] += _floor(theta, floor)
        weight = theta[j - 1] ** zeta if contour else 1.0
        # cumulative sums over all steps (for windowed estimates at marks)
        fstate[CWS], fstate[CWSC] = _neumaier(fstate[CWS], fstate[CWSC], weight * x)
        fstate[CW], fstate[CWC] = _neumaier(fstate[CW], fstate[CWC], weight)
        istate[CCOUNT] += 1
        if k > burn_in:
            fstate[WS], fstate[WSC] = _neumaier(fstate[WS], fstate[WSC], weight * x)
            fstate[W], fstate[WC] = _neumaier(fstate[W], fstate[WC], weight)
            istate[COUNT] += 1
            visits[j - 1] += 1
        rec_mult = _multiplier(theta, j, zeta, tau, du) if contour else 1.0
        if rec_mult < fstate[MINMULT]:
            fstate[MINMULT] = rec_mult
        if rec_mult < 0 and istate[FIRSTNEG] < 0:
            istate[FIRSTNEG] = k
        nm = istate[NMARK]
        while nm < marks.shape[0] and marks[nm] == k:
            mark_out[nm, 0] = k
            mark_out[nm, 1] = fstate[CWS] + fstate[CWSC]
            mark_out[nm, 2] = fstate[CW] + fstate[CWC]
            mark_out[nm, 3] = istate[CCOUNT]
            nm += 1
        istate[NMARK] = nm
        if k % thinning == 0:
            r = istate[NREC]
            if r < rec_out.shape[0]:
                rec_out[r, R_STEP] = k
                rec_out[r, R_X] = x
                rec_out[r, R_ENERGY] = u
                rec_out[r, R_J] = j
                rec_out[r, R_MULT] = rec_mult
                rec_out[r, R_THETAJ] = theta[j - 1]
                rec_out[r, R_WEIGHT] = weight
                if istate[COUNT] > 0:
                    rec_out[r, R_RUN] = (fstate[WS] + fstate[WSC]) / (fstate[W] + fstate[WC])
                else:
                    rec_out[r, R_RUN] = np.nan
                for i in range(m):
                    theta_out[r, i] = theta[i]
                istate[NREC] = r + 1
    fstate[X], fstate[V], fstate[GRAD] = x, v, g
    istate[J] = j
    return pos


@njit(cache=True)
def initial_eval(x, mix_logw, mix_mu, mix_var, tau):
    return mixture_eval(x, mix_logw, mix_mu, mix_var, tau)
