"""The diagonal flow on eigenpath combinations and its finite-n shadows.

A flow element is a finite combination sum_k c_k g_k of eigenpaths.  U^alpha
multiplies c_k by exp(2 pi i alpha y_k).  At dimension n it should match
u_n^{floor(alpha n)}, which is cheap to apply in the eigenbasis.
"""
import cmath
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ModeError, QuadratureTooCoarse, TruncationTooCoarse
from .secular import TWO_PI, Mode

TRUNCATION_TOL = 1e-12
SERIES_SWITCH = 1e-8


def power(alpha, n):
    """The exponent floor(alpha n) standing in for alpha_n."""
    return math.floor(alpha * n)


@dataclass(eq=False)
class FlowElement:
    """Coefficients over eigenpaths with their angle estimates and prefixes."""

    coeffs: dict
    y: dict
    prefixes: dict = field(default_factory=dict)

    def prefix(self):
        """(w_l) = sum_k c_k g_{k,l} over the tracked coordinates."""
        if not self.prefixes:
            return np.zeros(0, dtype=np.complex128)
        L = min(v.size for v in self.prefixes.values())
        w = np.zeros(L, dtype=np.complex128)
        for k, c in self.coeffs.items():
            w += c * self.prefixes[k][:L]
        return w

    def weight(self, delta):
        """sum_k (1 + |k|^{1+delta}) |c_k|^2."""
        return sum((1 + abs(k) ** (1 + delta)) * abs(c) ** 2 for k, c in self.coeffs.items())


def apply_U(alpha, elem):
    coeffs = {k: c * np.exp(2j * np.pi * alpha * elem.y[k]) for k, c in elem.coeffs.items()}
    return FlowElement(coeffs, dict(elem.y), dict(elem.prefixes))


def eigencoords(state, w):
    """<w, f_j> for a vector w supported on the first n coordinates."""
    if state.mode is not Mode.FULL:
        raise ModeError("eigenbasis expansion needs FULL eigenvectors")
    w = np.asarray(w, dtype=np.complex128)
    return state.vectors.conj().T @ w[: state.n]


def _residual(angles, eta, m, target):
    d = np.exp(1j * m * angles) - target
    norm = np.linalg.norm(eta)
    return float(np.linalg.norm(d * eta) / norm) if norm > 0 else 0.0


def flow_residual_eig(angles, eta, alpha, y_hat):
    """||u^{floor(alpha n)} g - exp(2 pi i alpha y) g|| / ||g|| with g = sum eta_j f_j."""
    if alpha == 0:
        return 0.0
    n = angles.size
    return _residual(angles, eta, power(alpha, n), np.exp(2j * np.pi * alpha * y_hat))


def flow_residual(state, g, alpha, y_hat):
    """Relative flow residual of the prefix g at the dimension of ``state``."""
    return flow_residual_eig(state.angles, eigencoords(state, g), alpha, y_hat)


def component_residual_eig(angles, eta, F_row, alpha, gamma, y_hat):
    """|<u^{a_n} g - exp(2 pi i alpha y) g, u^{c_n} e_l>| with F_row[j] = <f_j, e_l>."""
    if alpha == 0:
        return 0.0
    n = angles.size
    d = np.exp(1j * power(alpha, n) * angles) - np.exp(2j * np.pi * alpha * y_hat)
    return float(abs(np.sum(d * eta * np.exp(-1j * power(gamma, n) * angles) * F_row)))


def component_residual(state, g, alpha, gamma, ell, y_hat):
    eta = eigencoords(state, g)
    return component_residual_eig(state.angles, eta, state.vectors[ell - 1], alpha, gamma, y_hat)


def project_down(step, c, impl=None):
    """Coordinates in the eigenbasis of u_s of the projection onto C^s of
    sum_a c_a f_a^{(s+1)}.

    ``step`` holds (angles_s, mu_s, report) of the step s -> s+1.  Each new
    eigenvector expands over the old ones with coefficients
    h_a^{-1/2} mu_j / (lambda_j - lambda'_a); the e_{s+1} part is dropped.
    """
    angles, mu, report = step
    w = c / np.sqrt(report.h)
    lam = np.exp(1j * angles)
    z = np.exp(1j * report.angles)
    out = kernels.cauchy_apply(lam, z, w, impl=impl)
    # redo the two terms per root that sit next to their pole
    s = angles.size
    a = np.arange(s + 1)
    for j, x in ((a, report.xl), (a + 1, report.xr)):
        keep = (j >= 1) & (j <= s)
        jj = j[keep] - 1
        aa = a[keep]
        v = -x[keep]
        sv = np.sin(0.5 * v)
        exact = lam[jj] * (2 * sv * sv + 2j * sv * np.cos(0.5 * v))
        np.add.at(out, jj, w[aa] / exact - w[aa] / (lam[jj] - z[aa]))
    return mu * out


def backward_coords(history, top, levels, impl=None):
    """Eigenbasis coordinates of a top-level vector projected to each of ``levels``.

    ``history[s]`` is the step record (angles_s, mu_s, report_s) for s -> s+1
    and ``top`` the coordinates at the highest level.  Returns {n: eta}.
    """
    out = {}
    c = np.asarray(top, dtype=np.complex128)
    s = c.size
    want = set(levels)
    if s in want:
        out[s] = c.copy()
    while s > min(want):
        s -= 1
        c = project_down(history[s], c, impl=impl)
        if s in want:
            out[s] = c.copy()
    return out


@dataclass(frozen=True)
class InnerProductEstimate:
    value: complex
    method: str
    params: dict


def cesaro_inner(w, w2):
    w = np.asarray(w)
    w2 = np.asarray(w2)
    if w.size != w2.size:
        raise ValueError("prefixes must have equal length")
    return InnerProductEstimate(complex(np.vdot(w2, w) / w.size), "cesaro", {"n": w.size})


def abel_inner(w, w2, s, N=None):
    """(1 - s) sum_{l <= N} s^{l-1} w_l conj(w'_l), with the truncation checked."""
    w = np.asarray(w, dtype=np.complex128)
    w2 = np.asarray(w2, dtype=np.complex128)
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    N = min(w.size, w2.size) if N is None else N
    if N > min(w.size, w2.size):
        raise TruncationTooCoarse(f"need {N} terms, prefixes have {min(w.size, w2.size)}")
    prod = w[:N] * w2[:N].conj()
    tail = (1 - s) * s**N * np.abs(prod).max(initial=0.0)
    if tail >= TRUNCATION_TOL:
        raise TruncationTooCoarse(f"tail bound {tail:.3g} at N = {N}")
    weights = s ** np.arange(N)
    return InnerProductEstimate(complex((1 - s) * np.sum(weights * prod)), "abel", {"s": s, "N": N, "tail": tail})


def abel_terms(s, bound=1.0):
    """Smallest N with (1 - s) s^N bound < TRUNCATION_TOL."""
    return int(math.ceil(math.log(TRUNCATION_TOL / ((1 - s) * bound)) / math.log(s))) + 1


def holo_inner(w, w2, s, M=None, N=None):
    """2 (1 - s) times the mean of F(w) conj F(w') over M points of the circle |z| = s."""
    w = np.asarray(w, dtype=np.complex128)
    w2 = np.asarray(w2, dtype=np.complex128)
    N = min(w.size, w2.size) if N is None else N
    M = 2 * N + 1 if M is None else M
    if M <= 2 * N:
        raise QuadratureTooCoarse(f"M = {M} needs to exceed 2N = {2 * N}")
    r = s ** np.arange(N)
    # F(s e^{i theta_m}) for theta_m = 2 pi m / M via the inverse FFT
    Fw = np.fft.ifft(w[:N] * r, M) * M
    Fw2 = np.fft.ifft(w2[:N] * r, M) * M
    val = 2 * (1 - s) * np.mean(Fw * Fw2.conj())
    return InnerProductEstimate(complex(val), "holo", {"s": s, "N": N, "M": M})


def abel_matched(w, w2, s, N=None):
    """The Abel form that holo_inner reproduces: abel at s^2 rescaled by 2/(1 + s)."""
    est = abel_inner(w, w2, s * s, N)
    return InnerProductEstimate(est.value * 2 / (1 + s), "abel", dict(est.params, matched=s))


def moving_average_M(p, lam):
    """(1/p) sum_{j<p} lam^j for |lam| = 1."""
    d = lam - 1
    if abs(d) >= SERIES_SWITCH:
        # (1 - lam^p)/(p (1 - lam)) in half angles, free of the cancellation near lam = 1
        x = cmath.phase(lam)
        return cmath.exp(0.5j * (p - 1) * x) * math.sin(0.5 * p * x) / (p * math.sin(0.5 * x))
    # ((1 + d)^p - 1) / (p d) = sum_j binom(p, j+1) d^j / p
    total = 0j
    term = 1.0 + 0j
    j = 0
    while j < p:
        total += term
        term *= d * (p - j - 1) / (j + 2)
        j += 1
        if abs(term) < 1e-18 * abs(total):
            break
    return total


def mp_bound_sweep(count, rng, c=0.01, nmax=1000):
    """Check |M_n(lam)|^2 <= 1 - c ((n |lam - 1|) ^ 1)^2 on random (n, lam), n >= 2.

    Half of the phases are uniform, half log-uniform in [1e-7, 1] so that
    the small-angle regime is covered.  Returns (worst margin, largest c
    that would still pass, number of failures).
    """
    u = rng.uniforms(3 * count).reshape(3, count)
    n = 2 + np.floor(u[0] * (nmax - 1)).astype(int)
    phase = np.where(np.arange(count) % 2 == 0, TWO_PI * u[1], 10.0 ** (-7 * u[2]))
    lam = np.exp(1j * phase)
    M2 = np.array([abs(moving_average_M(int(p), l)) ** 2 for p, l in zip(n, lam)])
    x = np.minimum(n * np.abs(lam - 1), 1.0)
    margin = 1 - c * x * x - M2
    c_max = np.min((1 - M2) / (x * x))
    return float(margin.min()), float(c_max), int(np.sum(margin < 0))


def alpha_grid(alpha, n, delta):
    """floor(alpha n) and its neighbours at half and full n^{1-delta}."""
    base = power(alpha, n)
    w = n ** (1 - delta)
    return sorted({base, base - int(w / 2), base + int(w / 2), base - int(w), base + int(w)})


@dataclass
class MembershipReport:
    n: int
    component_sup: float
    norm_sup: float
    component_threshold: float
    norm_threshold: float

    @property
    def member(self):
        return self.component_sup <= self.component_threshold and self.norm_sup <= self.norm_threshold


def f_membership_check(w, Vw, state, alpha, gamma, ell, delta=0.15, delta_p=0.10, C=(1.0, 1.0)):
    """The two suprema defining membership, over the grid of exponents near floor(alpha n).

    ``C`` = (component constant, norm constant); see calibrate_membership.
    """
    if state.mode is not Mode.FULL:
        raise ModeError("membership needs FULL eigenvectors")
    n = state.n
    eta = eigencoords(state, w)
    zeta = eigencoords(state, Vw)
    row = state.vectors[ell - 1] * np.exp(-1j * power(gamma, n) * state.angles)
    comp = 0.0
    norm = 0.0
    for m in alpha_grid(alpha, n, delta):
        d = np.exp(1j * m * state.angles) * eta - zeta
        comp = max(comp, float(abs(np.sum(d * row))))
        norm = max(norm, float(np.linalg.norm(d)))
    return MembershipReport(n, comp, norm, C[0] * n**-delta_p, C[1] * n ** (0.5 - delta_p))


def calibrate_membership(report, delta_p=0.10, slack=2.0):
    """Constants making ``report`` sit at 1/slack of both thresholds."""
    n = report.n
    return (slack * report.component_sup * n**delta_p, slack * report.norm_sup * n ** (delta_p - 0.5))
