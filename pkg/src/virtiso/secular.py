"""Eigenvalues and eigenvectors of u_{n+1} from those of u_n.

With lambda_j = exp(i theta_j) the eigenvalues of u_n and (mu, nu) the
coordinates of the next column in the eigenbasis, the new eigenangles are
the roots of the real secular function

    s(t) = sum_j |mu_j|^2 cot((theta_j - t)/2) - |1 - nu|^2 cot(t/2) + 2 Im nu,

one on each arc of (0, theta_1, ..., theta_n, 2 pi).  Internally the point 1
is pole 0 with weight |1 - nu|^2, so the poles are P = (0, theta_1, ...).
"""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from . import kernels
from .errors import (
    BracketFailure,
    DimMismatch,
    IllConditioned,
    IndexUnresolvable,
    ModeError,
    NonConvergence,
    PoleEvaluation,
)
from .haar import UpdateCoeffs

TWO_PI = 2 * np.pi
POLE_TOL = 1e-13
POLE_GUARD = 1e-14
DEFAULT_TOL = 1e-13
MAXIT = 200
RECOVER_TOL = 1e-6


class Mode(Enum):
    FULL = "full"
    COORDS = "coords"
    NONE = "none"


@dataclass(frozen=True, eq=False)
class SpectralState:
    """Eigenangles of u_n in (0, 2 pi), increasing, with optional eigenvector data.

    FULL keeps the n x n matrix whose column k is f_k.  COORDS keeps an
    n x L slab whose row k holds the first L coordinates of f_k.
    """

    angles: np.ndarray
    mode: Mode = Mode.NONE
    vectors: np.ndarray | None = None
    phase_fixed: bool = True

    @property
    def n(self):
        return self.angles.size

    @property
    def L(self):
        if self.mode is Mode.COORDS:
            return self.vectors.shape[1]
        if self.mode is Mode.FULL:
            return self.n
        return 0

    @property
    def eigenvalues(self):
        return np.exp(1j * self.angles)

    def angle(self, k):
        """theta_k for a signed index, with theta_{k+n} = theta_k + 2 pi."""
        n = self.n
        j = (k - 1) % n
        return self.angles[j] + TWO_PI * ((k - 1 - j) // n)

    def coords(self, k):
        """Tracked coordinates of f_k (signed, periodic index)."""
        j = (k - 1) % self.n
        if self.mode is Mode.FULL:
            return self.vectors[:, j]
        if self.mode is Mode.COORDS:
            return self.vectors[j]
        raise ModeError("state carries no eigenvector data")

    def check(self, ortho_tol=1e-10):
        a = self.angles
        if a.ndim != 1 or a.size == 0:
            raise DimMismatch("angles must be a nonempty vector")
        if not (a[0] > 0 and a[-1] < TWO_PI and np.all(np.diff(a) > 0)):
            raise BracketFailure("angles are not strictly increasing in (0, 2 pi)")
        if self.mode is Mode.FULL:
            F = self.vectors
            dev = np.abs(F.conj().T @ F - np.eye(self.n)).max()
            if dev > ortho_tol:
                raise IllConditioned(f"eigenvector Gram deviation {dev:.3g}")
        return self

    def matrix(self):
        """Dense u_n = F diag(lambda) F^*; FULL mode only, for oracles."""
        if self.mode is not Mode.FULL:
            raise ModeError("matrix() needs FULL eigenvectors")
        F = self.vectors
        return (F * self.eigenvalues) @ F.conj().T


def initial_state(u1, mode=Mode.FULL):
    """State of u_1 = (u1), with the convention f_1 = -e_1."""
    theta = float(np.angle(u1)) % TWO_PI
    if theta == 0.0:
        theta = TWO_PI * np.finfo(float).eps
    vec = None if mode is Mode.NONE else -np.ones((1, 1), dtype=np.complex128)
    m = Mode.FULL if mode is Mode.COORDS else mode
    return SpectralState(np.array([theta]), m, vec)


def to_coords(state, L):
    """COORDS state holding the first L coordinates of each eigenvector."""
    if state.mode is Mode.COORDS:
        if state.L < L:
            raise ModeError(f"slab has only {state.L} coordinates")
        return SpectralState(state.angles, Mode.COORDS, np.ascontiguousarray(state.vectors[:, :L]))
    if state.mode is not Mode.FULL:
        raise ModeError("no eigenvector data to project")
    if L > state.n:
        raise ModeError(f"L = {L} exceeds n = {state.n}")
    return SpectralState(state.angles, Mode.COORDS, np.ascontiguousarray(state.vectors[:L].T))


def drop_vectors(state):
    return SpectralState(state.angles, Mode.NONE, None)


def poles(angles, coeffs):
    """(P, W, C): pole angles, weights and constant of the secular function."""
    P = np.concatenate(([0.0], np.asarray(angles, dtype=float)))
    W = np.concatenate(([abs(1 - coeffs.nu) ** 2], np.abs(coeffs.mu) ** 2))
    return P, W, 2 * coeffs.nu.imag


def decompose_in_eigenbasis(x, state):
    """UpdateCoeffs of a unit vector x in C^{n+1}: mu_j = <x, f_j>, nu = x_{n+1}."""
    if state.mode is not Mode.FULL:
        raise ModeError("decomposition needs FULL eigenvectors")
    x = np.asarray(x, dtype=np.complex128)
    if x.size != state.n + 1:
        raise DimMismatch(f"vector of length {x.size} for a state of dimension {state.n}")
    mu = state.vectors.conj().T @ x[:-1]
    return UpdateCoeffs(mu, complex(x[-1]))


def secular_function(t, angles, coeffs):
    P, W, C = poles(angles, coeffs)
    d = np.angle(np.exp(1j * (P - t)))
    if np.min(np.abs(d)) < POLE_TOL:
        raise PoleEvaluation(f"t = {t!r} is within {POLE_TOL} of a pole")
    return float(np.sum(W / np.tan(0.5 * (P - t))) + C)


def phi(z, angles, coeffs):
    """sum_j lambda_j |mu_j|^2/(lambda_j - z) + |1 - nu|^2/(1 - z) - (1 - conj nu)."""
    lam = np.exp(1j * np.asarray(angles))
    nu = coeffs.nu
    return complex(
        np.sum(lam * np.abs(coeffs.mu) ** 2 / (lam - z)) + abs(1 - nu) ** 2 / (1 - z) - (1 - nu.conjugate())
    )


@dataclass(eq=False)
class SecularSolveReport:
    """New angles with per-root diagnostics.

    ``xl`` and ``xr`` are the offsets of each root from the left and right
    pole of its arc; ``left`` says which one was used to place it.
    ``cauchy`` holds the fused sums over the rows passed to solve_secular.
    """

    angles: np.ndarray
    residuals: np.ndarray
    iterations: np.ndarray
    h: np.ndarray
    xl: np.ndarray
    xr: np.ndarray
    left: np.ndarray
    scale: np.ndarray
    cauchy: np.ndarray | None = None
    passes: np.ndarray | None = field(default=None, repr=False)


def solve_secular(state, coeffs, tol=DEFAULT_TOL, rows=None, impl=None, guard=POLE_GUARD):
    """Roots of s on every arc, one new angle per arc, in increasing order.

    ``rows`` (L x (n+1), indexed by pole) requests the Cauchy sums
    sum_j rows[l, j] / (exp(i P_j) - exp(i t_k)) along with the roots.
    """
    n = state.n
    if coeffs.n != n:
        raise DimMismatch(f"coefficients of dimension {coeffs.n} for a state of dimension {n}")
    P, W, C = poles(state.angles, coeffs)
    out = kernels.solve_arcs(P, W, C, rows, tol=tol, maxit=MAXIT, impl=impl)
    st = out["status"]
    if np.any(st == kernels.NONCONV):
        raise NonConvergence(f"root iteration did not converge on arcs {np.flatnonzero(st == kernels.NONCONV)[:5]}")
    xl, xr, t = out["xl"], out["xr"], out["t"]
    gap = np.minimum(xl, -xr)
    if np.any(st == kernels.BRACKET) or not np.all(gap > guard):
        raise BracketFailure(f"root within {guard} of a pole at dimension {n}")
    if not (t[0] > 0 and t[-1] < TWO_PI and np.all(t[:-1] < state.angles) and np.all(state.angles < t[1:])):
        raise BracketFailure(f"interlacing lost in floating point at dimension {n}")
    left = xl <= -xr
    return SecularSolveReport(
        angles=t,
        residuals=out["resid"],
        iterations=out["iters"],
        h=out["h"],
        xl=xl,
        xr=xr,
        left=left,
        scale=W.sum() / gap,
        cauchy=out["S"] if rows is not None else None,
        passes=out["passes"],
    )


def pole_root_offsets(P, report):
    """V[k, j] = P_j - t_k modulo 2 pi, exact to rounding even next to a pole."""
    m = P.size
    k = np.arange(m)
    PL = P
    PR = np.append(P[1:], TWO_PI)
    base = np.where(report.left, PL, PR)
    x = np.where(report.left, report.xl, report.xr)
    V = (P[None, :] - base[:, None]) - x[:, None]
    V[k, k] = -report.xl
    V[k, (k + 1) % m] = -report.xr
    return V


def root_differences(P, report):
    """lambda_j - lambda'_k as an (n+1) x (n+1) array, rows by new root."""
    V = pole_root_offsets(P, report)
    s = np.sin(0.5 * V)
    return np.exp(1j * P)[None, :] * (2 * s * s + 2j * s * np.cos(0.5 * V))


def update_eigenvectors(state, coeffs, report):
    """FULL state of u_{n+1} from the FULL state of u_n."""
    if state.mode is not Mode.FULL:
        raise ModeError("update_eigenvectors needs FULL eigenvectors")
    n = state.n
    P, W, _ = poles(state.angles, coeffs)
    G = 1.0 / root_differences(P, report)
    # the normalizer summed exactly on the same differences
    h = (np.abs(G) ** 2) @ W
    F = np.zeros((n + 1, n + 1), dtype=np.complex128)
    F[:n] = state.vectors @ (coeffs.mu[:, None] * G[:, 1:].T)
    F[n] = (coeffs.nu - 1) * G[:, 0]
    F /= np.sqrt(h)[None, :]
    return SpectralState(report.angles, Mode.FULL, F)


def slab_rows(state, coeffs):
    """Kernel rows mu_j <f_j, e_l> (pole 0 contributes nothing for l <= n)."""
    if state.mode is not Mode.COORDS:
        raise ModeError("slab rows need a COORDS state")
    S = state.vectors
    rows = np.zeros((S.shape[1], state.n + 1), dtype=np.complex128)
    rows[:, 1:] = (coeffs.mu[:, None] * S).T
    return rows


def update_coordinates(state, coeffs, report):
    """COORDS state of u_{n+1}: the first L coordinates of every new eigenvector.

    Uses the fused sums in ``report.cauchy`` when solve_secular was given
    slab_rows(state, coeffs); otherwise applies the Cauchy matrix directly.
    """
    if state.mode is not Mode.COORDS:
        raise ModeError("update_coordinates needs a COORDS state")
    L = state.L
    if L > state.n:
        raise ModeError(f"L = {L} exceeds n = {state.n}")
    if report.cauchy is not None and report.cauchy.shape[0] == L:
        S = report.cauchy.T
    else:
        P, _, _ = poles(state.angles, coeffs)
        G = 1.0 / root_differences(P, report)
        S = G @ slab_rows(state, coeffs).T
    return SpectralState(report.angles, Mode.COORDS, np.ascontiguousarray(S / np.sqrt(report.h)[:, None]))


def step(state, coeffs, tol=DEFAULT_TOL, impl=None):
    """One full update: (new state, report)."""
    if state.mode is Mode.COORDS:
        report = solve_secular(state, coeffs, tol, rows=slab_rows(state, coeffs), impl=impl)
        return update_coordinates(state, coeffs, report), report
    report = solve_secular(state, coeffs, tol, impl=impl)
    if state.mode is Mode.FULL:
        return update_eigenvectors(state, coeffs, report), report
    return SpectralState(report.angles, Mode.NONE, None), report


def recover_coeffs_from_angles(old, new):
    """(|mu_j|^2, nu) from the eigenangles of u_n and u_{n+1}.

    Solves sum_j v_j lambda_j/(lambda_j - lambda'_k) + v_{n+1}/(1 - lambda'_k) = 1
    for v = (|mu|^2/(1 - conj nu), 1 - nu).
    """
    old = np.asarray(old, dtype=float)
    new = np.asarray(new, dtype=float)
    n = old.size
    if new.size != n + 1:
        raise DimMismatch("need n old and n + 1 new angles")
    if not (new[0] > 0 and new[-1] < TWO_PI and np.all(new[:-1] < old) and np.all(old < new[1:])):
        raise IllConditioned("angles do not interlace strictly")
    lam = np.exp(1j * old)
    lnew = np.exp(1j * new)
    R = np.empty((n + 1, n + 1), dtype=np.complex128)
    R[:, :n] = lam[None, :] / (lam[None, :] - lnew[:, None])
    R[:, n] = 1 / (1 - lnew)
    rhs = np.ones(n + 1, dtype=np.complex128)
    try:
        v = np.linalg.solve(R, rhs)
    except np.linalg.LinAlgError as exc:
        raise IllConditioned(str(exc)) from exc
    nu = 1 - v[n]
    w = v[:n] * (1 - nu.conjugate())
    mu2 = w.real
    # a consistent solution is real, positive and on the sphere
    resid = max(
        np.abs(R @ v - rhs).max(),
        np.abs(w.imag).max(initial=0.0),
        abs(mu2.sum() + abs(nu) ** 2 - 1),
        -mu2.min(initial=0.0),
    )
    if not resid <= RECOVER_TOL:
        raise IllConditioned(f"recovery residual {resid:.3g}")
    return mu2, complex(nu)


def resolve(n, k):
    """0-based position of signed index k among n angles."""
    if n < 1 or abs(k) > n:
        raise IndexUnresolvable(f"index {k} at dimension {n}")
    return (k - 1) % n
