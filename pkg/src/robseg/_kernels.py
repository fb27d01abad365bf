"""Numba kernels for the piecewise-quadratic algebra and the DP step.

A piecewise-quadratic function over theta is stored as five parallel
arrays: ``hi`` (closed upper endpoints, strictly increasing, last one
+inf), ``a``/``b``/``c`` (quadratic coefficients per piece) and ``tau``
(int64 last-change label per piece).  Piece i covers ``(hi[i-1], hi[i]]``
with an implicit ``hi[-1] = -inf``.

Everything here is private; use the wrappers in :mod:`robseg.pwq`.
"""

import numpy as np
from numba import njit

# loss codes shared with robseg.losses
L2 = 0
L1 = 1
HUBER = 2
BIWEIGHT = 3
QUANTILE = 4

COEF_TOL = 1e-12       # coefficient equality tolerance when merging pieces
ROOT_SNAP_TOL = 1e-12  # roots this close to an endpoint do not split the piece
TANGENCY_TOL = 1e-12   # discriminant in [-TANGENCY_TOL, 0] treated as tangency


@njit(cache=True)
def loss_arrays(code, y, k, u):
    """Piece arrays (hi, a, b, c) of the per-point loss, as a function of theta."""
    if code == L2:
        hi = np.empty(1)
        a = np.empty(1)
        b = np.empty(1)
        c = np.empty(1)
        hi[0] = np.inf
        a[0] = 1.0
        b[0] = -2.0 * y
        c[0] = y * y
    elif code == L1:
        hi = np.empty(2)
        a = np.zeros(2)
        b = np.empty(2)
        c = np.empty(2)
        hi[0] = y
        hi[1] = np.inf
        b[0] = -1.0
        c[0] = y
        b[1] = 1.0
        c[1] = -y
    elif code == HUBER:
        hi = np.empty(3)
        a = np.zeros(3)
        b = np.empty(3)
        c = np.empty(3)
        hi[0] = y - k
        hi[1] = y + k
        hi[2] = np.inf
        b[0] = -2.0 * k
        c[0] = 2.0 * k * y - k * k
        a[1] = 1.0
        b[1] = -2.0 * y
        c[1] = y * y
        b[2] = 2.0 * k
        c[2] = -2.0 * k * y - k * k
    elif code == BIWEIGHT:
        hi = np.empty(3)
        a = np.zeros(3)
        b = np.zeros(3)
        c = np.empty(3)
        hi[0] = y - k
        hi[1] = y + k
        hi[2] = np.inf
        c[0] = k * k
        a[1] = 1.0
        b[1] = -2.0 * y
        c[1] = y * y
        c[2] = k * k
    else:  # QUANTILE
        hi = np.empty(2)
        a = np.zeros(2)
        b = np.empty(2)
        c = np.empty(2)
        hi[0] = y
        hi[1] = np.inf
        b[0] = -2.0 * u
        c[0] = 2.0 * u * y
        b[1] = 2.0 * (1.0 - u)
        c[1] = -2.0 * (1.0 - u) * y
    return hi, a, b, c


@njit(cache=True)
def merge_add(hi1, a1, b1, c1, tau1, hi2, a2, b2, c2):
    """Pointwise sum of two tiling piece lists; tau labels come from the first.

    Output boundaries are the union of input boundaries; adjacent output
    pieces that agree in coefficients (within COEF_TOL) and tau are merged.
    """
    n1 = hi1.size
    n2 = hi2.size
    nmax = n1 + n2
    oh = np.empty(nmax)
    oa = np.empty(nmax)
    ob = np.empty(nmax)
    oc = np.empty(nmax)
    ot = np.empty(nmax, np.int64)
    i = 0
    j = 0
    m = 0
    while True:
        h = hi1[i] if hi1[i] < hi2[j] else hi2[j]
        na = a1[i] + a2[j]
        nb = b1[i] + b2[j]
        nc = c1[i] + c2[j]
        nt = tau1[i]
        if (m > 0 and ot[m - 1] == nt
                and abs(oa[m - 1] - na) <= COEF_TOL
                and abs(ob[m - 1] - nb) <= COEF_TOL
                and abs(oc[m - 1] - nc) <= COEF_TOL):
            oh[m - 1] = h
        else:
            oh[m] = h
            oa[m] = na
            ob[m] = nb
            oc[m] = nc
            ot[m] = nt
            m += 1
        if h == np.inf:
            break
        if hi1[i] == h:
            i += 1
        if hi2[j] == h:
            j += 1
    return oh[:m].copy(), oa[:m].copy(), ob[:m].copy(), oc[:m].copy(), ot[:m].copy()


@njit(cache=True)
def clip_to_constant(hi, a, b, c, tau, const, new_tau):
    """Pointwise min of a piece list with the constant ``const``.

    Pieces are split at the real roots of (piece - const) strictly inside
    their interval (snapped to the endpoint within ROOT_SNAP_TOL; double
    roots within TANGENCY_TOL of zero discriminant do not split).  On
    sub-pieces where the piece is >= const the result takes the constant
    and the label ``new_tau``; ties go to the constant.  Adjacent constant
    pieces are merged.
    """
    n = hi.size
    nmax = 3 * n
    oh = np.empty(nmax)
    oa = np.empty(nmax)
    ob = np.empty(nmax)
    oc = np.empty(nmax)
    ot = np.empty(nmax, np.int64)
    m = 0
    lo = -np.inf
    for i in range(n):
        h = hi[i]
        ai = a[i]
        bi = b[i]
        ci = c[i] - const
        # roots of ai*x^2 + bi*x + ci inside (lo, h)
        nr = 0
        q1 = 0.0
        q2 = 0.0
        if ai != 0.0:
            disc = bi * bi - 4.0 * ai * ci
            if disc > 0.0:
                sq = np.sqrt(disc)
                qq = -0.5 * (bi + (sq if bi >= 0.0 else -sq))
                x1 = qq / ai
                x2 = ci / qq
                if x1 > x2:
                    x1, x2 = x2, x1
                if x1 > lo + ROOT_SNAP_TOL and x1 < h - ROOT_SNAP_TOL:
                    q1 = x1
                    nr = 1
                if x2 > lo + ROOT_SNAP_TOL and x2 < h - ROOT_SNAP_TOL and x2 > x1:
                    if nr == 0:
                        q1 = x2
                    else:
                        q2 = x2
                    nr += 1
        elif bi != 0.0:
            x1 = -ci / bi
            if x1 > lo + ROOT_SNAP_TOL and x1 < h - ROOT_SNAP_TOL:
                q1 = x1
                nr = 1
        prev = lo
        for s in range(nr + 1):
            if s == nr:
                right = h
            elif s == 0:
                right = q1
            else:
                right = q2
            if right <= prev:
                continue
            if prev == -np.inf and right == np.inf:
                x = 0.0
            elif prev == -np.inf:
                x = right - 1.0
            elif right == np.inf:
                x = prev + 1.0
            else:
                x = 0.5 * (prev + right)
            val = (ai * x + bi) * x + ci
            if val >= 0.0:
                if (m > 0 and ot[m - 1] == new_tau and oa[m - 1] == 0.0
                        and ob[m - 1] == 0.0 and oc[m - 1] == const):
                    oh[m - 1] = right
                else:
                    oh[m] = right
                    oa[m] = 0.0
                    ob[m] = 0.0
                    oc[m] = const
                    ot[m] = new_tau
                    m += 1
            else:
                if (m > 0 and ot[m - 1] == tau[i]
                        and abs(oa[m - 1] - ai) <= COEF_TOL
                        and abs(ob[m - 1] - bi) <= COEF_TOL
                        and abs(oc[m - 1] - c[i]) <= COEF_TOL):
                    oh[m - 1] = right
                else:
                    oh[m] = right
                    oa[m] = ai
                    ob[m] = bi
                    oc[m] = c[i]
                    ot[m] = tau[i]
                    m += 1
            prev = right
        lo = h
    return oh[:m].copy(), oa[:m].copy(), ob[:m].copy(), oc[:m].copy(), ot[:m].copy()


@njit(cache=True)
def piecewise_min(hi, a, b, c, tau):
    """Global minimum over all pieces.

    Returns (status, min_value, argmin, tau_label, piece_index); status 1
    means the function is unbounded below.  Scan is left to right with a
    strict comparison, so the leftmost piece wins ties.
    """
    n = hi.size
    best = np.inf
    bestx = 0.0
    bestt = np.int64(0)
    besti = -1
    lo = -np.inf
    for i in range(n):
        h = hi[i]
        ai = a[i]
        bi = b[i]
        ci = c[i]
        if ai > 0.0:
            v = -bi / (2.0 * ai)
            if v > lo and v <= h:
                x = v
            elif v <= lo:
                x = lo
            else:
                x = h
            m = (ai * x + bi) * x + ci
        elif ai < 0.0:
            if lo == -np.inf or h == np.inf:
                return 1, 0.0, 0.0, np.int64(0), -1
            mlo = (ai * lo + bi) * lo + ci
            mhi = (ai * h + bi) * h + ci
            if mlo <= mhi:
                m = mlo
                x = lo
            else:
                m = mhi
                x = h
        elif bi != 0.0:
            if bi > 0.0:
                if lo == -np.inf:
                    return 1, 0.0, 0.0, np.int64(0), -1
                m = bi * lo + ci
                x = lo
            else:
                if h == np.inf:
                    return 1, 0.0, 0.0, np.int64(0), -1
                m = bi * h + ci
                x = h
        else:
            m = ci
            if h != np.inf:
                x = h
            elif lo == -np.inf:
                x = 0.0
            else:
                x = lo + 1.0
        if m < best:
            best = m
            bestx = x
            bestt = tau[i]
            besti = i
        lo = h
    return 0, best, bestx, bestt, besti


@njit(cache=True)
def dp_step(hi, a, b, c, tau, t, beta, code, y, k, u):
    """One DP iteration consuming the (t+1)-th data point ``y``.

    ``t`` is the number of points consumed before this step.  Returns the
    updated piece arrays plus the recorded (best cost, best last change)
    for the prefix of length t, and a status flag (1 = unbounded).
    """
    cost = 0.0
    lbl = np.int64(0)
    if t > 0:
        status, cost, _x, lbl, _i = piecewise_min(hi, a, b, c, tau)
        if status != 0:
            return hi, a, b, c, tau, np.nan, np.int64(-1), 1
        hi, a, b, c, tau = clip_to_constant(hi, a, b, c, tau, cost + beta, t)
    lh, la, lb, lc = loss_arrays(code, y, k, u)
    hi, a, b, c, tau = merge_add(hi, a, b, c, tau, lh, la, lb, lc)
    return hi, a, b, c, tau, cost, lbl, 0
