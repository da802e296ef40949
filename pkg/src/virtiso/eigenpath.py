"""Per-index trajectories across dimensions.

For a fixed signed index k the path follows theta_k^{(n)} scaled by n/2pi,
the renormalizer D_k^{(n)} built multiplicatively from the update data,
and the renormalized coordinates g_{k,l} = D_k <f_k, e_l>.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngmod
from .errors import IndexUnresolvable, ModeError
from .secular import TWO_PI, Mode, poles, resolve, root_differences, solve_secular

WINDOW = (-4, -3, -2, -1, 1, 2, 3, 4)


def first_dimension(k):
    """Smallest n at which the path of index k starts (D = 1 there)."""
    return k if k >= 1 else 1 - k


def scaled_angle(state, k):
    n = state.n
    resolve(n, k)
    return n * state.angle(k) / TWO_PI


def _arc(n, k):
    # arc (of the n+1 arcs) holding the new root with index k, and whether
    # old theta_k is its right pole
    return (k - 1, True) if k >= 1 else (n + k, False)


def step_factor(before, coeffs, report, k):
    """h_k^{1/2} (lambda_k - lambda'_k) / mu_k for the step n -> n+1."""
    n = before.n
    j = resolve(n, k)
    a, right = _arc(n, k)
    x = report.xr[a] if right else report.xl[a]
    s = math.sin(0.5 * x)
    # lambda (1 - exp(i x)) without cancellation
    diff = np.exp(1j * before.angles[j]) * (2 * s * s - 2j * s * math.cos(0.5 * x))
    return math.sqrt(report.h[a]) * diff / coeffs.mu[j]


def ratio_diagnostic(before, after, coeffs, k):
    """theta'_k |mu_k|^2 / (theta_k - theta'_k); tends to 1 for fixed k."""
    j = resolve(before.n, k)
    return after.angle(k) * abs(coeffs.mu[j]) ** 2 / (before.angle(k) - after.angle(k))


def t_coords(state, k, L, phase=1.0):
    """sqrt(n) times the first L coordinates of f_k, rotated by ``phase``.

    With ``phase`` = D_k/|D_k| these converge along the tower.
    """
    if state.mode is Mode.NONE:
        raise ModeError("t-coordinates need eigenvector data")
    resolve(state.n, k)
    v = state.coords(k)[:L]
    return math.sqrt(state.n) * phase * v


@dataclass
class PathSample:
    n: int
    scaled_angle: float
    abs_D: float
    phase: complex
    g: np.ndarray
    ratio: float = float("nan")


@dataclass(eq=False)
class EigenPath:
    """Trajectory of one signed index k, L tracked coordinates."""

    k: int
    L: int = 8
    samples: list = field(default_factory=list)
    log_abs_D: float = 0.0
    phase: complex = 1.0 + 0.0j
    martingale: float = 0.0
    keep: bool = True

    @property
    def D(self):
        return math.exp(self.log_abs_D) * self.phase

    @property
    def y_estimate(self):
        return self.samples[-1].scaled_angle

    @property
    def D_limit_estimate(self):
        s = self.samples[-1]
        return s.abs_D**2 / s.n

    def g_coords(self, state):
        if state.mode is Mode.NONE:
            return np.zeros(0, dtype=np.complex128)
        return self.D * state.coords(self.k)[: self.L]

    def t_coords(self, state):
        return t_coords(state, self.k, self.L, self.phase)

    def _sample(self, state, ratio=float("nan")):
        return PathSample(
            state.n,
            scaled_angle(state, self.k),
            math.exp(self.log_abs_D),
            self.phase,
            self.g_coords(state),
            ratio,
        )

    def start(self, state):
        if state.n != first_dimension(self.k):
            raise IndexUnresolvable(f"path {self.k} starts at n = {first_dimension(self.k)}, not {state.n}")
        self.log_abs_D = 0.0
        self.phase = 1.0 + 0.0j
        self.martingale = 0.0
        self.samples = [self._sample(state)]
        return self

    def record_step(self, before, after, coeffs, report, keep=None):
        """Advance D from dimension n to n+1 and append the sample at n+1."""
        n = before.n
        j = resolve(n, self.k)
        f = step_factor(before, coeffs, report, self.k)
        self.log_abs_D += math.log(abs(f))
        self.phase *= f / abs(f)
        self.phase /= abs(self.phase)
        self.martingale += abs(coeffs.mu[j]) ** 2 - 1.0 / n
        sample = self._sample(after, ratio_diagnostic(before, after, coeffs, self.k))
        if keep if keep is not None else self.keep:
            self.samples.append(sample)
        else:
            self.samples[-1:] = [sample]
        return sample


def record_step(path, before, after, coeffs, report):
    path.record_step(before, after, coeffs, report)
    return path


def martingale_phase_test(state, coeffs, rng, k, ell, trials, D=1.0 + 0.0j, redraw=True):
    """Conditional mean of <g_k^{(n+1)}, e_l> over uniform phases of mu.

    Moduli of mu, nu and the eigenangles of u_n stay fixed.  Since the new
    eigenangles depend only on those, one root solve serves every trial.
    Returns (mean, standard error, sample variance, values).
    """
    if state.mode is not Mode.FULL:
        raise ModeError("the phase test needs FULL eigenvectors")
    n = state.n
    j = resolve(n, k)
    report = solve_secular(state, coeffs)
    P, _, _ = poles(state.angles, coeffs)
    a, right = _arc(n, k)
    G = 1.0 / root_differences(P, report)[a]
    lam = np.exp(1j * state.angles[j])
    x = report.xr[a] if right else report.xl[a]
    s = math.sin(0.5 * x)
    dlam = lam * (2 * s * s - 2j * s * math.cos(0.5 * x))
    if not 1 <= ell <= n:
        raise IndexUnresolvable(f"coordinate {ell} at dimension {n}")
    row = state.vectors[ell - 1]
    amp = np.abs(coeffs.mu)
    if redraw:
        ph = rng.phases(trials * n).reshape(trials, n)
    else:
        ph = (coeffs.mu / amp)[None, :]
    mu = amp[None, :] * ph
    # D' <f'_k, e_l> = D h^{1/2} dlam / mu_k * h^{-1/2} sum_j mu_j G_j <f_j, e_l>
    vals = D * dlam / mu[:, j] * (mu * (G[1:] * row)[None, :]).sum(axis=1)
    mean = vals.mean()
    var = np.mean(np.abs(vals - mean) ** 2)
    se = math.sqrt(var / max(vals.size - 1, 1))
    return complex(mean), se, var, vals


def conditional_variance(state, coeffs, k, ell=None, D=1.0 + 0.0j):
    """Variance of <g_k^{(n+1)}, e_l> over the phases of mu.

    Equals |D|^2 |lambda_k - lambda'_k|^2 / |mu_k|^2 times
    sum_{j != k} |mu_j|^2 |<f_j, e_l>|^2 / |lambda_j - lambda'_k|^2.
    Without ``ell`` the coordinate factors are dropped, which bounds every l.
    """
    n = state.n
    j = resolve(n, k)
    report = solve_secular(state, coeffs)
    P, _, _ = poles(state.angles, coeffs)
    a, right = _arc(n, k)
    d = root_differences(P, report)[a]
    x = report.xr[a] if right else report.xl[a]
    dl2 = 4 * math.sin(0.5 * x) ** 2
    w = np.abs(coeffs.mu) ** 2 / np.abs(d[1:]) ** 2
    if ell is not None:
        w = w * np.abs(state.vectors[ell - 1]) ** 2
    w[j] = 0.0
    return abs(D) ** 2 * dl2 / abs(coeffs.mu[j]) ** 2 * w.sum()


def phase_stream(seed, n):
    return rngmod.stream(seed, n, rngmod.AUX)
