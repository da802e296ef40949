"""Compiled kernels for the interlacing root solve and Cauchy-type sums.

Poles are P[0] = 0 < P[1] < ... < P[n] < 2 pi with weights W.  The secular
function is s(t) = sum_j W[j] cot((P[j] - t) / 2) + C; it increases from
-inf to +inf on every arc (P[a], P[a+1]), the last arc ending at 2 pi.

Each root is kept as offsets xl = t - P[a] > 0 and xr = t - P[a+1] < 0 so
that the distance to the nearer pole is never formed by cancellation.
Poles within NEAR positions of the arc are summed exactly; the rest enter
through a cubic Taylor expansion about a center that is moved until the
local correction is negligible against the distance to the far poles.

For large pole counts the arcs are grouped into blocks.  Poles outside a
padded window around a block enter through a power series about the block
center, built once per block; only the window is summed per arc.
"""
import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
EPS = 2.220446049250313e-16
NEAR = 8
RECENTER = 1e-6
MAX_PASSES = 8
FIRST_PASS = 1e-6

BLOCK_MIN = 768
BLOCK_SCALE = 1.2
BLOCK_PAD = 3
SERIES_STEP = 8
SERIES_MAX = 40
SERIES_TOL = 1e-16

OK = 0
BRACKET = 1
NONCONV = 2

_FAST = {"reassoc", "contract", "nsz", "arcp"}


def _helper(fast=False):
    # helpers never allocate; compiling them without reference counting
    # removes an atomic increment and decrement per array argument per call
    opts = {"cache": True, "error_model": "numpy", "_nrt": False}
    if fast:
        opts["fastmath"] = _FAST
    return njit(**opts)


# Unsigned loop indices below skip the negative-index check, which is what
# lets these loops vectorize.


@_helper(fast=True)
def _far_segment(lr, li, w, i0, i1, zr, zi):
    f0 = 0.0
    f1 = 0.0
    f2 = 0.0
    f3 = 0.0
    for j in range(np.uint64(i0), np.uint64(i1)):
        dr = lr[j] - zr
        di = li[j] - zi
        q = 1.0 / (dr * dr + di * di)
        c = 2.0 * (li[j] * zr - lr[j] * zi) * q
        wq = w[j] * q
        f0 += w[j] * c
        f1 += wq
        f2 += wq * c
        f3 += wq * c * c
    return f0, f1, f2, f3


@_helper(fast=True)
def _far_segment32(lr, li, w, i0, i1, zr, zi):
    # single precision: only used to place the first expansion center
    zr = np.float32(zr)
    zi = np.float32(zi)
    f0 = np.float32(0.0)
    f1 = np.float32(0.0)
    f2 = np.float32(0.0)
    f3 = np.float32(0.0)
    for j in range(np.uint64(i0), np.uint64(i1)):
        dr = lr[j] - zr
        di = li[j] - zi
        q = np.float32(1.0) / (dr * dr + di * di)
        c = np.float32(2.0) * (li[j] * zr - lr[j] * zi) * q
        wq = w[j] * q
        f0 += w[j] * c
        f1 += wq
        f2 += wq * c
        f3 += wq * c * c
    return np.float64(f0), np.float64(f1), np.float64(f2), np.float64(f3)


@_helper(fast=True)
def _far_segment_slab(lr, li, w, ar, ai, i0, i1, zr, zi):
    # double pass fused with one row of Cauchy sums
    f0 = 0.0
    f1 = 0.0
    f2 = 0.0
    f3 = 0.0
    s0r = 0.0
    s0i = 0.0
    s1r = 0.0
    s1i = 0.0
    for j in range(np.uint64(i0), np.uint64(i1)):
        dr = lr[j] - zr
        di = li[j] - zi
        q = 1.0 / (dr * dr + di * di)
        c = 2.0 * (li[j] * zr - lr[j] * zi) * q
        wq = w[j] * q
        f0 += w[j] * c
        f1 += wq
        f2 += wq * c
        f3 += wq * c * c
        rr = dr * q
        ri = -di * q
        pr = ar[j] * rr - ai[j] * ri
        pi = ar[j] * ri + ai[j] * rr
        s0r += pr
        s0i += pi
        s1r += pr * rr - pi * ri
        s1i += pr * ri + pi * rr
    return f0, f1, f2, f3, s0r, s0i, s1r, s1i


@_helper()
def _far_group(a, r0, r1, m, lr, li, w, lr32, li32, w32, ar, ai, mode, zr, zi):
    # Taylor coefficients (value and three t-derivatives) of the poles at
    # relative positions r0..r1 around arc a, plus the first Cauchy row
    # when mode is 2; mode 0 single precision, 1 double.  The arrays hold
    # two periods so that the range never wraps.
    u0 = 0.0
    u1 = 0.0
    u2 = 0.0
    u3 = 0.0
    count = r1 - r0 + 1
    if count <= 0:
        return 0.0, 0.0, 0.0, 0.0, u0, u1, u2, u3
    i0 = (a + r0) % m
    i1 = i0 + count
    if mode == 0:
        s0, s1, s2, s3 = _far_segment32(lr32, li32, w32, i0, i1, zr, zi)
    elif mode == 1:
        s0, s1, s2, s3 = _far_segment(lr, li, w, i0, i1, zr, zi)
    else:
        s0, s1, s2, s3, u0, u1, u2, u3 = _far_segment_slab(lr, li, w, ar, ai, i0, i1, zr, zi)
    return s0, 2.0 * s1, 2.0 * s2, s1 + 3.0 * s3, u0, u1, u2, u3


@_helper(fast=True)
def _reciprocals(lr, li, i0, i1, zr, zi, br, bi):
    for j in range(np.uint64(i0), np.uint64(i1)):
        dr = lr[j] - zr
        di = li[j] - zi
        q = 1.0 / (dr * dr + di * di)
        br[j] = dr * q
        bi[j] = -di * q


@_helper(fast=True)
def _slab_segment(ar, ai, br, bi, i0, i1):
    s0r = 0.0
    s0i = 0.0
    s1r = 0.0
    s1i = 0.0
    for j in range(np.uint64(i0), np.uint64(i1)):
        rr = br[j]
        ri = bi[j]
        pr = ar[j] * rr - ai[j] * ri
        pi = ar[j] * ri + ai[j] * rr
        s0r += pr
        s0i += pi
        s1r += pr * rr - pi * ri
        s1i += pr * ri + pi * rr
    return s0r, s0i, s1r, s1i


@_helper()
def _slab_far(a, r0, r1, m, lr, li, zr, zi, AR, AI, br, bi, out):
    # out[l] += (sum a/(lam - z), sum a/(lam - z)^2) over relative positions r0..r1
    count = r1 - r0 + 1
    if count <= 0:
        return
    start = (a + r0) % m
    stop = min(start + count, m)
    wrap = max(start + count - m, 0)
    _reciprocals(lr, li, start, stop, zr, zi, br, bi)
    _reciprocals(lr, li, 0, wrap, zr, zi, br, bi)
    for l in range(AR.shape[0]):
        ar = AR[l]
        ai = AI[l]
        s0r, s0i, s1r, s1i = _slab_segment(ar, ai, br, bi, start, stop)
        t0r, t0i, t1r, t1i = _slab_segment(ar, ai, br, bi, 0, wrap)
        out[l, 0] += s0r + t0r
        out[l, 1] += s0i + t0i
        out[l, 2] += s1r + t1r
        out[l, 3] += s1i + t1i


@_helper(fast=True)
def _series_init(lr, li, w, i0, i1, z0r, z0i, rr, ri, cr, ci):
    # rho = 1/(lam - z0) and c rho with c = 2i w lam, packed from offset 0
    base = np.uint64(i0)
    for k in range(np.uint64(i1 - i0)):
        j = base + k
        dr = lr[j] - z0r
        di = li[j] - z0i
        q = 1.0 / (dr * dr + di * di)
        pr = dr * q
        pi = -di * q
        rr[k] = pr
        ri[k] = pi
        wr = -2.0 * w[j] * li[j]
        wi = 2.0 * w[j] * lr[j]
        cr[k] = wr * pr - wi * pi
        ci[k] = wr * pi + wi * pr


@_helper(fast=True)
def _coef_init(ar, ai, j0, j1, o, rr, ri, cr, ci):
    # c rho for Cauchy coefficients c = a, source range j0..j1 packed from o
    base = np.uint64(j0)
    ou = np.uint64(o)
    for k in range(np.uint64(j1 - j0)):
        j = base + k
        pr = rr[ou + k]
        pi = ri[ou + k]
        cr[ou + k] = ar[j] * pr - ai[j] * pi
        ci[ou + k] = ar[j] * pi + ai[j] * pr


@_helper(fast=True)
def _sweep(rr, ri, cr, ci, s0, s1, Sr, Si, k0):
    # adds sum c rho^k for k = k0..k0+7 to S and leaves c rho^8 in place
    a0r = a0i = a1r = a1i = a2r = a2i = a3r = a3i = 0.0
    b0r = b0i = b1r = b1i = b2r = b2i = b3r = b3i = 0.0
    for j in range(np.uint64(s0), np.uint64(s1)):
        pr = rr[j]
        pi = ri[j]
        xr = cr[j]
        xi = ci[j]
        a0r += xr
        a0i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        a1r += xr
        a1i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        a2r += xr
        a2i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        a3r += xr
        a3i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        b0r += xr
        b0i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        b1r += xr
        b1i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        b2r += xr
        b2i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        b3r += xr
        b3i += xi
        xr, xi = xr * pr - xi * pi, xr * pi + xi * pr
        cr[j] = xr
        ci[j] = xi
    Sr[k0] += a0r
    Si[k0] += a0i
    Sr[k0 + 1] += a1r
    Si[k0 + 1] += a1i
    Sr[k0 + 2] += a2r
    Si[k0 + 2] += a2i
    Sr[k0 + 3] += a3r
    Si[k0 + 3] += a3i
    Sr[k0 + 4] += b0r
    Si[k0 + 4] += b0i
    Sr[k0 + 5] += b1r
    Si[k0 + 5] += b1i
    Sr[k0 + 6] += b2r
    Si[k0 + 6] += b2i
    Sr[k0 + 7] += b3r
    Si[k0 + 7] += b3i


@_helper()
def _block_series(lr2, li2, w2, AR, AI, m, i0, nright, nleft, z0r, z0i, p,
                  rr, ri, cr, ci, TRr, TRi, TLr, TLi, UR, UI):
    # coefficients about z0 of sum c/(lam - z) over the poles i0..i0+nright
    # (TR), the next nleft poles (TL), and all of them for each Cauchy row
    n = nright + nleft
    TRr[:] = 0.0
    TRi[:] = 0.0
    TLr[:] = 0.0
    TLi[:] = 0.0
    UR[:, :] = 0.0
    UI[:, :] = 0.0
    _series_init(lr2, li2, w2, i0, i0 + n, z0r, z0i, rr, ri, cr, ci)
    for k0 in range(0, p, SERIES_STEP):
        _sweep(rr, ri, cr, ci, 0, nright, TRr, TRi, k0)
        _sweep(rr, ri, cr, ci, nright, n, TLr, TLi, k0)
    stop = min(i0 + n, m)
    wrap = i0 + n - stop
    for l in range(AR.shape[0]):
        ar = AR[l]
        ai = AI[l]
        _coef_init(ar, ai, i0, stop, 0, rr, ri, cr, ci)
        _coef_init(ar, ai, 0, wrap, stop - i0, rr, ri, cr, ci)
        ur = UR[l]
        ui = UI[l]
        for k0 in range(0, p, SERIES_STEP):
            _sweep(rr, ri, cr, ci, 0, n, ur, ui, k0)


@_helper()
def _series_eval(Sr, Si, p, xr, xi):
    # value and the first three derivatives (over 1, 1, 2, 6) by Horner
    g0r = g0i = g1r = g1i = g2r = g2i = g3r = g3i = 0.0
    for k in range(p - 1, -1, -1):
        g3r, g3i = g3r * xr - g3i * xi + g2r, g3r * xi + g3i * xr + g2i
        g2r, g2i = g2r * xr - g2i * xi + g1r, g2r * xi + g2i * xr + g1i
        g1r, g1i = g1r * xr - g1i * xi + g0r, g1r * xi + g1i * xr + g0i
        g0r, g0i = g0r * xr - g0i * xi + Sr[k], g0r * xi + g0i * xr + Si[k]
    return g0r, g0i, g1r, g1i, g2r, g2i, g3r, g3i


@_helper()
def _series_eval1(Sr, Si, p, xr, xi):
    g0r = g0i = g1r = g1i = 0.0
    for k in range(p - 1, -1, -1):
        g1r, g1i = g1r * xr - g1i * xi + g0r, g1r * xi + g1i * xr + g0i
        g0r, g0i = g0r * xr - g0i * xi + Sr[k], g0r * xi + g0i * xr + Si[k]
    return g0r, g0i, g1r, g1i


@_helper()
def _series_t(Sr, Si, p, zr, zi, z0r, z0i):
    # value and three t-derivatives of Re G(exp(i t)) at z = exp(i t)
    g0r, g0i, g1r, g1i, h2r, h2i, h3r, h3i = _series_eval(Sr, Si, p, zr - z0r, zi - z0i)
    g2r = 2.0 * h2r
    g2i = 2.0 * h2i
    g3r = 6.0 * h3r
    g3i = 6.0 * h3i
    z2r = zr * zr - zi * zi
    z2i = 2.0 * zr * zi
    z3r = z2r * zr - z2i * zi
    z3i = z2r * zi + z2i * zr
    # z G', z^2 G'', z^3 G'''
    ar = zr * g1r - zi * g1i
    ai = zr * g1i + zi * g1r
    br = z2r * g2r - z2i * g2i
    bi = z2r * g2i + z2i * g2r
    cr = z3r * g3r - z3i * g3i
    ci = z3r * g3i + z3i * g3r
    d1 = -ai
    d2 = -br - ar
    d3 = ci + 3.0 * bi + ai
    return g0r, d1, d2, d3


@_helper()
def _offset(P, m, a, r, PR):
    k = a + r
    j = k % m
    return P[j] + ((k - j) // m) * TWO_PI - PR


@_helper(fast=True)
def _near_sums(nEr, nEi, nW, i0, i1, er, ei):
    g = 0.0
    gp = 0.0
    for i in range(np.uint64(i0), np.uint64(i1)):
        cr = nEr[i] * er - nEi[i] * ei
        ci = nEr[i] * ei + nEi[i] * er
        u = 1.0 - cr
        d = 2.0 / (u * u + ci * ci)
        g += nW[i] * ci * d
        gp += nW[i] * d
    return g, gp


@_helper()
def _model(xl, xr, cnt, nEr, nEi, nW, nlc, WL, WR, C, L0, L1, L2, L3, R0, R1, R2, R3, delta):
    cotA = -1.0 / math.tan(0.5 * xl)
    tau = math.tan(0.5 * xr)
    cotB = -1.0 / tau
    GL = WL * cotA
    GLp = WL * 0.5 * (1.0 + cotA * cotA)
    GR = WR * cotB
    GRp = WR * 0.5 * (1.0 + cotB * cotB)
    # exp(-i xr) from the half-angle tangent
    tt = 1.0 / (1.0 + tau * tau)
    er = (1.0 - tau * tau) * tt
    ei = -2.0 * tau * tt
    g, gp = _near_sums(nEr, nEi, nW, 0, nlc, er, ei)
    GL += g
    GLp += gp
    g, gp = _near_sums(nEr, nEi, nW, nlc, cnt, er, ei)
    GR += g
    GRp += gp
    d2 = delta * delta
    GL += L0 + L1 * delta + L2 * d2 * 0.5 + L3 * d2 * delta / 6.0
    GLp += L1 + L2 * delta + L3 * d2 * 0.5
    GR += R0 + R1 * delta + R2 * d2 * 0.5 + R3 * d2 * delta / 6.0
    GRp += R1 + R2 * delta + R3 * d2 * 0.5
    return GL + GR + C, GLp + GRp, GL, GLp, GR, GRp, cotA, cotB


@_helper()
def _delta(left, xl, xr, cleft, cxl, cxr):
    if left and cleft:
        return xl - cxl
    if not left and not cleft:
        return xr - cxr
    return xl - cxl


@_helper()
def _bracket_difference(lam_r, lam_i, v):
    # lambda_j - exp(i t) with v = P[j] - t known to full relative precision
    sv = math.sin(0.5 * v)
    dr = 2.0 * sv * sv
    di = 2.0 * sv * math.cos(0.5 * v)
    return lam_r * dr - lam_i * di, lam_r * di + lam_i * dr


@_helper()
def _series_order(ratio):
    # smallest multiple of SERIES_STEP whose truncation, third derivative
    # included, stays below SERIES_TOL; 0 when the block is too crowded
    p = SERIES_STEP
    while p <= SERIES_MAX:
        if ratio ** p * float(p) ** 3 <= SERIES_TOL:
            return p
        p += SERIES_STEP
    return 0


def block_length(m):
    """Arcs per block for m poles, or 0 when every arc sums its far poles directly."""
    return _block_length(m, NEAR)


@njit(cache=True)
def _block_length(m, near):
    if m < BLOCK_MIN:
        return 0
    B = max(2 * near, int(BLOCK_SCALE * math.sqrt(m)))
    if m - B - 2 * BLOCK_PAD * B - 1 < 2 * near:
        return 0
    return B


@njit(cache=True, error_model="numpy")
def solve_arcs(P, W, C, AR, AI, tol, maxit, near, blocks):
    """Roots of the secular function, one per arc.

    AR, AI hold L rows of coefficients a_j (indexed by pole) for the fused
    Cauchy sums S[l, k] = sum_j a_j / (exp(i P[j]) - exp(i t_k)).  With
    ``blocks`` false every arc sums all its far poles directly.
    """
    m = P.shape[0]
    L = AR.shape[0]
    lr = np.cos(P)
    li = np.sin(P)
    lr2 = np.concatenate((lr, lr))
    li2 = np.concatenate((li, li))
    w2 = np.concatenate((W, W))
    lr32 = lr2.astype(np.float32)
    li32 = li2.astype(np.float32)
    w32 = w2.astype(np.float32)
    xr_out = np.empty(m)
    xl_out = np.empty(m)
    t_out = np.empty(m)
    h_out = np.empty(m)
    res_out = np.empty(m)
    it_out = np.zeros(m, dtype=np.int64)
    pass_out = np.zeros(m, dtype=np.int64)
    status = np.zeros(m, dtype=np.int64)
    SR = np.zeros((L, m))
    SI = np.zeros((L, m))
    br = np.zeros(m)
    bi = np.zeros(m)

    if m <= 2 * near:
        nr = m // 2
        nl = m - nr
        hasfar = False
    else:
        nl = near
        nr = near
        hasfar = True
    nfar = m - nl - nr
    nfr = nfar // 2
    nn = nl + nr
    nEr = np.empty(nn)
    nEi = np.empty(nn)
    nW = np.empty(nn)
    nJ = np.empty(nn, dtype=np.int64)
    L0 = L1 = L2 = L3 = R0 = R1 = R2 = R3 = 0.0
    sl0 = sl1 = sl2 = sl3 = 0.0
    ar0 = np.concatenate((AR[0], AR[0])) if L > 0 else lr2
    ai0 = np.concatenate((AI[0], AI[0])) if L > 0 else li2
    slab = np.zeros((L, 4))

    B = _block_length(m, near) if (blocks and hasfar) else 0
    pad = BLOCK_PAD * B
    sc_rr = np.empty(m if B > 0 else 0)
    sc_ri = np.empty_like(sc_rr)
    sc_cr = np.empty_like(sc_rr)
    sc_ci = np.empty_like(sc_rr)
    TRr = np.zeros(SERIES_MAX)
    TRi = np.zeros(SERIES_MAX)
    TLr = np.zeros(SERIES_MAX)
    TLi = np.zeros(SERIES_MAX)
    UR = np.zeros((L, SERIES_MAX))
    UI = np.zeros((L, SERIES_MAX))
    b0 = 0
    b1 = 0
    order = 0
    z0r = 1.0
    z0i = 0.0

    for a in range(m):
        PL = P[a]
        PR = P[a + 1] if a + 1 < m else TWO_PI
        arc = PR - PL
        if not arc > 0.0:
            status[a] = BRACKET
            continue
        cphi = 1.0 / math.tan(0.5 * arc)
        cquart = 1.0 / math.tan(0.25 * arc)
        jL = a
        jR = (a + 1) % m
        WL = W[jL]
        WR = W[jR]
        cnt = 0
        for r in range(1 - nl, nr + 1):
            if r == 0 or r == 1:
                continue
            # exp(i (P[j] - PR)) as a product of stored phases
            j = (a + r) % m
            nEr[cnt] = lr[j] * lr[jR] + li[j] * li[jR]
            nEi[cnt] = li[j] * lr[jR] - lr[j] * li[jR]
            nJ[cnt] = j
            nW[cnt] = W[j]
            cnt += 1
        nlc = nl - 1

        if B > 0 and a >= b1:
            b0 = a
            b1 = min(a + B, m)
            Pend = P[b1] if b1 < m else TWO_PI
            tau0 = 0.5 * (P[b0] + Pend)
            z0r = math.cos(tau0)
            z0i = math.sin(tau0)
            half = 2.0 * math.sin(0.25 * (Pend - P[b0]))
            jn = (b1 + pad + 1) % m
            jp = (b0 - pad - 1) % m
            dmin = min(abs(2.0 * math.sin(0.5 * (P[jn] - tau0))), abs(2.0 * math.sin(0.5 * (P[jp] - tau0))))
            order = _series_order(half / dmin) if dmin > 0.0 else 0
            if order > 0:
                nbf = m - (b1 - b0) - 2 * pad - 1
                nbr = nbf // 2
                _block_series(lr2, li2, w2, AR, AI, m, (b1 + pad + 1) % m, nbr, nbf - nbr, z0r, z0i, order,
                              sc_rr, sc_ri, sc_cr, sc_ci, TRr, TRi, TLr, TLi, UR, UI)
        if order > 0:
            rR1 = b1 + pad - a
            rL0 = b0 - pad - a
        else:
            rR1 = nr + nfr
            rL0 = nr + nfr + 1 - m

        # warm start: distance ~ angle * weight from the pole nearer to 0 mod 2 pi
        left = True
        xl = 0.5 * arc
        xr = -0.5 * arc
        if PR <= math.pi:
            g = -PR * WR
            if -arc < g < 0.0:
                left = False
                xl = arc + g
                xr = g
        elif PL >= math.pi:
            g = (TWO_PI - PL) * WL
            if 0.0 < g < arc:
                xl = g
        if left:
            xr = xl - arc
        if not left and xl <= 0.5 * arc:
            left = True
            xl = arc + xr

        dfar = 0.0
        passes = 0
        total_it = 0
        cleft = left
        cxl = xl
        cxr = xr
        fail = False
        while True:
            passes += 1
            cleft = left
            cxl = xl
            cxr = xr
            if hasfar:
                tc = PL + xl if left else PR + xr
                zr = math.cos(tc)
                zi = math.sin(tc)
                mode = 0 if passes == 1 else (2 if L == 1 else 1)
                R0, R1, R2, R3, v0, v1, v2, v3 = _far_group(
                    a, nr + 1, rR1, m, lr2, li2, w2, lr32, li32, w32, ar0, ai0, mode, zr, zi
                )
                L0, L1, L2, L3, u0, u1, u2, u3 = _far_group(
                    a, rL0, -nl, m, lr2, li2, w2, lr32, li32, w32, ar0, ai0, mode, zr, zi
                )
                if order > 0:
                    e0, e1, e2, e3 = _series_t(TRr, TRi, order, zr, zi, z0r, z0i)
                    R0 += e0
                    R1 += e1
                    R2 += e2
                    R3 += e3
                    e0, e1, e2, e3 = _series_t(TLr, TLi, order, zr, zi, z0r, z0i)
                    L0 += e0
                    L1 += e1
                    L2 += e2
                    L3 += e3
                if mode == 2:
                    sl0 = v0 + u0
                    sl1 = v1 + u1
                    sl2 = v2 + u2
                    sl3 = v3 + u3
                    if order > 0:
                        e0, e1, e2, e3 = _series_eval1(UR[0], UI[0], order, zr - z0r, zi - z0i)
                        sl0 += e0
                        sl1 += e1
                        sl2 += e2
                        sl3 += e3
                dfar = min(_offset(P, m, a, nr + 1, PR) - xr, xr - _offset(P, m, a, -nl, PR))

            # the first pass only places the expansion center
            stop_rel = 4.0 * EPS if (passes > 1 or not hasfar) else FIRST_PASS
            lo = 0.0
            hi = arc
            dprev = np.inf
            it = 0
            fresh = False
            while True:
                it += 1
                delta = _delta(left, xl, xr, cleft, cxl, cxr)
                val, der, GL, GLp, GR, GRp, cotA, cotB = _model(
                    xl, xr, cnt, nEr, nEi, nW, nlc, WL, WR, C, L0, L1, L2, L3, R0, R1, R2, R3, delta
                )
                if val < 0.0:
                    lo = max(lo, xl)
                else:
                    hi = min(hi, xl)
                # osculating fit a + b cot of each group at its bracketing pole
                bL = GLp / (0.5 * (1.0 + cotA * cotA))
                aL = GL - bL * cotA
                bR = GRp / (0.5 * (1.0 + cotB * cotB))
                aR = GR - bR * cotB
                if bL <= 0.0:
                    bL = EPS * WL
                if bR <= 0.0:
                    bR = EPS * WR
                aM = aL + aR + C
                if aM + (bR - bL) * cquart > 0.0:
                    beta = aM + (bL + bR) * cphi
                    gam = bR - aM * cphi
                    disc = math.sqrt(max(beta * beta + 4.0 * bL * gam, 0.0))
                    if beta >= 0.0:
                        y = (beta + disc) / (2.0 * bL)
                    else:
                        y = -2.0 * gam / (beta - disc)
                    nleft = True
                    nxl = 2.0 * math.atan2(1.0, y)
                    nxr = nxl - arc
                else:
                    beta = (bL + bR) * cphi - aM
                    gam = aM * cphi + bL
                    disc = math.sqrt(max(beta * beta + 4.0 * bR * gam, 0.0))
                    if beta >= 0.0:
                        y = (beta + disc) / (2.0 * bR)
                    else:
                        y = -2.0 * gam / (beta - disc)
                    nleft = False
                    nxr = -2.0 * math.atan2(1.0, y)
                    nxl = arc + nxr
                if nleft and left:
                    step = abs(nxl - xl)
                elif not nleft and not left:
                    step = abs(nxr - xr)
                else:
                    step = abs(nxl - xl)
                small = xl if left else -xr
                if step <= stop_rel * small:
                    fresh = True
                    break
                if not (lo <= nxl <= hi) or nxl != nxl:
                    nxl = 0.5 * (lo + hi)
                    nleft = nxl <= 0.5 * arc
                    nxr = nxl - arc
                if nleft and left:
                    step = abs(nxl - xl)
                elif not nleft and not left:
                    step = abs(nxr - xr)
                else:
                    step = abs(nxl - xl)
                left = nleft
                xl = nxl
                xr = nxr
                # tol bounds the error relative to the nearer pole, hence also absolutely
                if step <= tol * small or (step <= tol and step >= dprev):
                    break
                dprev = step
                if it >= maxit:
                    fail = True
                    break
            total_it += it
            if fail or not hasfar:
                break
            if passes >= 2 and abs(_delta(left, xl, xr, cleft, cxl, cxr)) <= RECENTER * dfar:
                break
            if passes >= MAX_PASSES:
                fail = True
                break

        if fail:
            status[a] = NONCONV
        if xl <= 0.0 or xr >= 0.0:
            status[a] = BRACKET
        delta = _delta(left, xl, xr, cleft, cxl, cxr)
        if not fresh:
            val, der, GL, GLp, GR, GRp, cotA, cotB = _model(
                xl, xr, cnt, nEr, nEi, nW, nlc, WL, WR, C, L0, L1, L2, L3, R0, R1, R2, R3, delta
            )
        xl_out[a] = xl
        xr_out[a] = xr
        t_out[a] = PL + xl if left else PR + xr
        h_out[a] = 0.5 * der
        res_out[a] = abs(val)
        it_out[a] = total_it
        pass_out[a] = passes

        if L > 0:
            er = math.cos(xr)
            ei = -math.sin(xr)
            tc = PL + cxl if cleft else PR + cxr
            zr = math.cos(tc)
            zi = math.sin(tc)
            # i z_c delta, the first-order Taylor factor of the far sums
            fr = -zi * delta
            fi = zr * delta
            if hasfar:
                if L == 1:
                    slab[0, 0] = sl0
                    slab[0, 1] = sl1
                    slab[0, 2] = sl2
                    slab[0, 3] = sl3
                else:
                    slab[:, :] = 0.0
                    _slab_far(a, nr + 1, rR1, m, lr, li, zr, zi, AR, AI, br, bi, slab)
                    _slab_far(a, rL0, -nl, m, lr, li, zr, zi, AR, AI, br, bi, slab)
                    if order > 0:
                        for l in range(L):
                            e0, e1, e2, e3 = _series_eval1(UR[l], UI[l], order, zr - z0r, zi - z0i)
                            slab[l, 0] += e0
                            slab[l, 1] += e1
                            slab[l, 2] += e2
                            slab[l, 3] += e3
            for l in range(L):
                accr = 0.0
                acci = 0.0
                if hasfar:
                    accr = slab[l, 0] + fr * slab[l, 2] - fi * slab[l, 3]
                    acci = slab[l, 1] + fr * slab[l, 3] + fi * slab[l, 2]
                dr, di = _bracket_difference(lr[jL], li[jL], -xl)
                q = 1.0 / (dr * dr + di * di)
                accr += (AR[l, jL] * dr + AI[l, jL] * di) * q
                acci += (AI[l, jL] * dr - AR[l, jL] * di) * q
                dr, di = _bracket_difference(lr[jR], li[jR], -xr)
                q = 1.0 / (dr * dr + di * di)
                accr += (AR[l, jR] * dr + AI[l, jR] * di) * q
                acci += (AI[l, jR] * dr - AR[l, jR] * di) * q
                for i in range(cnt):
                    j = nJ[i]
                    cr = nEr[i] * er - nEi[i] * ei
                    ci = nEr[i] * ei + nEi[i] * er
                    ur = 1.0 - cr
                    dr = lr[j] * ur - li[j] * ci
                    di = lr[j] * ci + li[j] * ur
                    q = 1.0 / (dr * dr + di * di)
                    accr += (AR[l, j] * dr + AI[l, j] * di) * q
                    acci += (AI[l, j] * dr - AR[l, j] * di) * q
                SR[l, a] = accr
                SI[l, a] = acci
    return t_out, xl_out, xr_out, h_out, res_out, it_out, pass_out, status, SR, SI


@njit(cache=True, error_model="numpy", fastmath=_FAST)
def cauchy_apply(lr, li, zr, zi, wr, wi):
    """out[i] = sum_a w[a] / (lam[i] - z[a]) by direct differences."""
    m = lr.shape[0]
    outr = np.zeros(m)
    outi = np.zeros(m)
    for i in range(m):
        sr = 0.0
        si = 0.0
        for a in range(np.uint64(0), np.uint64(zr.shape[0])):
            dr = lr[i] - zr[a]
            di = li[i] - zi[a]
            q = 1.0 / (dr * dr + di * di)
            sr += (wr[a] * dr + wi[a] * di) * q
            si += (wi[a] * dr - wr[a] * di) * q
        outr[i] = sr
        outi[i] = si
    return outr, outi


@njit(cache=True, error_model="numpy")
def evolve_batch(theta0, Z, n, tol, maxit, near):
    """Eigenangles at dimension n of many independent towers.

    Row s of Z holds the Gaussian draws for every step 1..n-1 of tower s,
    j + 1 of them for step j; each block is normalized onto the sphere and
    read as (mu, nu).  Angles only, so the far field is never blocked.
    """
    S = theta0.shape[0]
    out = np.empty((S, n))
    status = np.zeros(S, dtype=np.int64)
    AR = np.zeros((0, n + 1))
    for s in range(S):
        th = np.empty(n)
        th[0] = theta0[s]
        off = 0
        for j in range(1, n):
            m = j + 1
            x = Z[s, off : off + m]
            off += m
            nrm = 0.0
            for i in range(m):
                nrm += x[i].real * x[i].real + x[i].imag * x[i].imag
            P = np.empty(m)
            W = np.empty(m)
            P[0] = 0.0
            nu = x[j] / math.sqrt(nrm)
            d = 1.0 - nu
            W[0] = d.real * d.real + d.imag * d.imag
            for i in range(j):
                P[i + 1] = th[i]
                W[i + 1] = (x[i].real * x[i].real + x[i].imag * x[i].imag) / nrm
            res = solve_arcs(P, W, 2.0 * nu.imag, AR[:, :m], AR[:, :m], tol, maxit, near, False)
            t = res[0]
            st = res[7]
            for i in range(m):
                if st[i] != OK:
                    status[s] = st[i]
                th[i] = t[i]
        for i in range(n):
            out[s, i] = th[i]
    return out, status
