"""Pure numpy version of the interlacing root solve.

Same contract and iteration as the compiled kernel, but every secular sum
runs over all poles at once, vectorized across arcs.  Work is O(m^2) per
iteration, which is fine for the dimensions where the fallback is useful.
"""
import numpy as np

TWO_PI = 2.0 * np.pi
EPS = np.finfo(float).eps
NEAR = 8
OK = 0
BRACKET = 1
NONCONV = 2
CHUNK = 256


def block_length(m):
    return 0


def _offsets(P, rows):
    # P[(a + r) % m] - P[a] for r = 0..m-1, unwrapped to [0, 2 pi)
    m = P.size
    idx = (rows[:, None] + np.arange(m)[None, :]) % m
    off = P[idx] - P[rows][:, None]
    off[off < 0] += TWO_PI
    return idx, off


def _groups(P, W, rows, xl, xr, left):
    """Left-half and right-half sums of s and s' at the current iterates."""
    m = P.size
    idx, off = _offsets(P, rows)
    arc = np.where(rows + 1 < m, P[(rows + 1) % m], TWO_PI) - P[rows]
    # v = P_j - t, measured from the nearer bracketing pole
    v = np.where(left[:, None], off - xl[:, None], (off - arc[:, None]) - xr[:, None])
    v[:, 0] = -xl
    if m > 1:
        v[:, 1] = -xr
    w = W[idx]
    cot = 1.0 / np.tan(0.5 * v)
    g = w * cot
    gp = 0.5 * w * (1.0 + cot * cot)
    half = m // 2
    # relative positions 1..half are right of the arc, the rest left
    gr = g[:, 1 : half + 1].sum(axis=1)
    grp = gp[:, 1 : half + 1].sum(axis=1)
    gl = g[:, 0:1].sum(axis=1) + g[:, half + 1 :].sum(axis=1)
    glp = gp[:, 0:1].sum(axis=1) + gp[:, half + 1 :].sum(axis=1)
    return gl, glp, gr, grp, cot[:, 0], cot[:, 1] if m > 1 else cot[:, 0]


def _solve_rows(P, W, C, rows, tol, maxit):
    m = P.size
    PL = P[rows]
    PR = np.where(rows + 1 < m, P[(rows + 1) % m], TWO_PI)
    arc = PR - PL
    cphi = 1.0 / np.tan(0.5 * arc)
    cquart = 1.0 / np.tan(0.25 * arc)
    WL = W[rows]
    WR = W[(rows + 1) % m]
    k = rows.size
    left = np.ones(k, dtype=bool)
    xl = 0.5 * arc
    xr = -0.5 * arc
    lo = np.zeros(k)
    hi = arc.copy()
    dprev = np.full(k, np.inf)
    active = np.ones(k, dtype=bool)
    iters = np.zeros(k, dtype=np.int64)
    fail = np.zeros(k, dtype=bool)
    for it in range(1, maxit + 1):
        a = np.flatnonzero(active)
        if a.size == 0:
            break
        iters[a] = it
        gl, glp, gr, grp, cotA, cotB = _groups(P, W, rows[a], xl[a], xr[a], left[a])
        val = gl + gr + C
        neg = val < 0
        lo[a] = np.where(neg, np.maximum(lo[a], xl[a]), lo[a])
        hi[a] = np.where(neg, hi[a], np.minimum(hi[a], xl[a]))
        # osculating fit a + b cot of each half at its bracketing pole
        bL = glp / (0.5 * (1.0 + cotA * cotA))
        aL = gl - bL * cotA
        bR = grp / (0.5 * (1.0 + cotB * cotB))
        aR = gr - bR * cotB
        bL = np.where(bL > 0, bL, EPS * WL[a])
        bR = np.where(bR > 0, bR, EPS * WR[a])
        aM = aL + aR + C
        cp = cphi[a]
        nleft = aM + (bR - bL) * cquart[a] > 0
        bb = np.where(nleft, bL, bR)
        beta = np.where(nleft, aM + (bL + bR) * cp, (bL + bR) * cp - aM)
        gam = np.where(nleft, bR - aM * cp, aM * cp + bL)
        disc = np.sqrt(np.maximum(beta * beta + 4.0 * bb * gam, 0.0))
        with np.errstate(divide="ignore", invalid="ignore"):
            y = np.where(beta >= 0, (beta + disc) / (2.0 * bb), -2.0 * gam / (beta - disc))
        ang = 2.0 * np.arctan2(1.0, y)
        nxl = np.where(nleft, ang, arc[a] - ang)
        nxr = np.where(nleft, ang - arc[a], -ang)
        same = nleft == left[a]
        step = np.where(same & ~nleft, np.abs(nxr - xr[a]), np.abs(nxl - xl[a]))
        small = np.where(left[a], xl[a], -xr[a])
        done = step <= 4.0 * EPS * small
        bad = ~((lo[a] <= nxl) & (nxl <= hi[a]))
        mid = 0.5 * (lo[a] + hi[a])
        nxl = np.where(bad, mid, nxl)
        nleft = np.where(bad, mid <= 0.5 * arc[a], nleft)
        nxr = np.where(bad, mid - arc[a], nxr)
        same = nleft == left[a]
        step = np.where(same & ~nleft, np.abs(nxr - xr[a]), np.abs(nxl - xl[a]))
        move = ~done
        upd = a[move]
        left[upd] = nleft[move]
        xl[upd] = nxl[move]
        xr[upd] = nxr[move]
        stall = move & (((step <= tol) & (step >= dprev[a])) | (step <= tol * small))
        dprev[a] = step
        active[a[done | stall]] = False
    fail[active] = True
    return xl, xr, left, iters, fail


def _slab(P, AR, AI, rows, xl, xr, left):
    m = P.size
    idx, off = _offsets(P, rows)
    arc = np.where(rows + 1 < m, P[(rows + 1) % m], TWO_PI) - P[rows]
    v = np.where(left[:, None], off - xl[:, None], (off - arc[:, None]) - xr[:, None])
    v[:, 0] = -xl
    if m > 1:
        v[:, 1] = -xr
    lam = np.exp(1j * P[idx])
    s = np.sin(0.5 * v)
    # lambda_j - exp(i t) = lambda_j (1 - exp(-i v)) without cancellation
    diff = lam * (2.0 * s * s + 2j * s * np.cos(0.5 * v))
    A = AR + 1j * AI
    return np.stack([(A[l][idx] / diff).sum(axis=1) for l in range(A.shape[0])]) if A.shape[0] else np.zeros((0, rows.size), complex)


def solve_arcs(P, W, C, AR, AI, tol, maxit, near=NEAR, blocks=True):
    """Same outputs as the compiled solve_arcs; ``near`` and ``blocks`` are ignored."""
    P = np.asarray(P, dtype=float)
    W = np.asarray(W, dtype=float)
    m = P.size
    L = AR.shape[0]
    t = np.empty(m)
    xl = np.empty(m)
    xr = np.empty(m)
    h = np.empty(m)
    res = np.empty(m)
    iters = np.zeros(m, dtype=np.int64)
    status = np.zeros(m, dtype=np.int64)
    SR = np.zeros((L, m))
    SI = np.zeros((L, m))
    for r0 in range(0, m, CHUNK):
        rows = np.arange(r0, min(r0 + CHUNK, m))
        PL = P[rows]
        PR = np.where(rows + 1 < m, P[(rows + 1) % m], TWO_PI)
        bad = ~(PR - PL > 0)
        cl, cr, left, it, fail = _solve_rows(P, W, C, rows, tol, maxit)
        gl, glp, gr, grp, _, _ = _groups(P, W, rows, cl, cr, left)
        xl[rows] = cl
        xr[rows] = cr
        t[rows] = np.where(left, PL + cl, PR + cr)
        h[rows] = 0.5 * (glp + grp)
        res[rows] = np.abs(gl + gr + C)
        iters[rows] = it
        st = np.where(fail, NONCONV, OK)
        st = np.where((cl <= 0) | (cr >= 0) | bad, BRACKET, st)
        status[rows] = st
        if L:
            S = _slab(P, AR, AI, rows, cl, cr, left)
            SR[:, rows] = S.real
            SI[:, rows] = S.imag
    passes = np.ones(m, dtype=np.int64)
    return t, xl, xr, h, res, iters, passes, status, SR, SI


def cauchy_apply(lr, li, zr, zi, wr, wi):
    lam = lr + 1j * li
    z = zr + 1j * zi
    w = wr + 1j * wi
    out = np.empty(lam.size, dtype=np.complex128)
    for i0 in range(0, lam.size, CHUNK):
        out[i0 : i0 + CHUNK] = (w[None, :] / (lam[i0 : i0 + CHUNK, None] - z[None, :])).sum(axis=1)
    return out.real.copy(), out.imag.copy()


def _batch_roots(P, W, C, tol, maxit):
    """Roots on every arc for a stack of secular functions (rows of P, W, C).

    Safeguarded Newton in the arc offset with all poles summed directly.
    """
    S, m = P.shape
    PR = np.concatenate((P[:, 1:], np.full((S, 1), TWO_PI)), axis=1)
    lo = np.zeros((S, m))
    hi = PR - P
    x = 0.5 * hi
    status = np.zeros(S, dtype=np.int64)
    for it in range(maxit):
        v = P[:, None, :] - (P[:, :, None] + x[:, :, None])
        cot = 1.0 / np.tan(0.5 * v)
        f = (W[:, None, :] * cot).sum(axis=2) + C[:, None]
        fp = (0.5 * W[:, None, :] * (1.0 + cot * cot)).sum(axis=2)
        lo = np.where(f < 0, x, lo)
        hi = np.where(f < 0, hi, x)
        nx = x - f / fp
        nx = np.where((nx > lo) & (nx < hi), nx, 0.5 * (lo + hi))
        done = np.abs(nx - x) <= np.maximum(tol * np.minimum(nx, (PR - P) - nx), 4 * EPS * nx)
        x = nx
        if np.all(done):
            break
    else:
        status[:] = NONCONV
    return P + x, status


def evolve_batch(theta0, Z, n, tol, maxit, near=NEAR):
    S = theta0.size
    th = np.asarray(theta0, dtype=float)[:, None]
    status = np.zeros(S, dtype=np.int64)
    off = 0
    for j in range(1, n):
        x = Z[:, off : off + j + 1]
        off += j + 1
        x = x / np.linalg.norm(x, axis=1)[:, None]
        nu = x[:, j]
        P = np.concatenate((np.zeros((S, 1)), th), axis=1)
        W = np.concatenate((np.abs(1 - nu)[:, None] ** 2, np.abs(x[:, :j]) ** 2), axis=1)
        th, st = _batch_roots(P, W, 2 * nu.imag, tol, maxit)
        status = np.maximum(status, st)
    return th, status
