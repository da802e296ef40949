"""Kernels, correlation functions, gap probabilities and Monte Carlo tests."""
import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sst

from .errors import DegenerateInterval, InsufficientSamples, WindowViolation

TWO_PI = 2 * np.pi


def kernel_finite(t, n):
    """sin(n t/2) / (2 pi sin(t/2)), equal to n/2pi on the diagonal."""
    t = np.asarray(t, dtype=float)
    s = np.sin(0.5 * t)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = np.sin(0.5 * n * t) / (TWO_PI * s)
    return np.where(np.abs(s) < 1e-300, n / TWO_PI * np.cos(0.5 * n * t) / np.cos(0.5 * t), k)


def kernel_sine(y):
    # np.sinc is sin(pi y)/(pi y) with the removable singularity filled in
    return np.sinc(np.asarray(y, dtype=float))


def kernel_scaled(y, n):
    """Finite-n kernel in the scaled variable y = n t / 2pi, so that K(0) = 1."""
    y = np.asarray(y, dtype=float)
    return kernel_finite(TWO_PI * y / n, n) * TWO_PI / n


def rho_r(points, n=None):
    """det [K(y_i - y_j)]: sine kernel, or the scaled finite-n kernel when n is given."""
    y = np.asarray(points, dtype=float)
    d = y[:, None] - y[None, :]
    K = kernel_sine(d) if n is None else kernel_scaled(d, n)
    return float(np.linalg.det(K))


def gap_probability(n, a, b):
    """Probability that u_n has no eigenangle in [a, b].

    That is the probability that every eigenangle lies in the complement J,
    which equals det M^J with M^J_{jk} = int_J exp(i (j - k) t) dt / 2pi.
    Returns (probability, bound) where bound = exp(-(b - a) n / 2pi) caps it.
    """
    if not (0 <= a <= b <= TWO_PI):
        raise DegenerateInterval(f"[{a}, {b}] is not an interval of [0, 2 pi]")
    bound = math.exp(-(b - a) * n / TWO_PI)
    if b == a:
        return 1.0, bound
    if b - a == TWO_PI:
        # the complement has measure zero, so M^J vanishes identically
        return 0.0, bound
    m = np.arange(n)[:, None] - np.arange(n)[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        inside = (np.exp(1j * m * b) - np.exp(1j * m * a)) / (TWO_PI * 1j * m)
    inside[m == 0] = (b - a) / TWO_PI
    M = np.eye(n) - inside
    p = float(np.linalg.det(M).real)
    p = min(max(p, 0.0), 1.0)
    if p > bound * (1 + 1e-9) + 1e-15:
        raise AssertionError(f"avoidance probability {p} exceeds the bound {bound}")
    return p, bound


def scaled_points(angles):
    """Eigenangles times n/2pi, mapped to (-n/2, n/2] and sorted."""
    angles = np.asarray(angles, dtype=float)
    n = angles.size
    y = angles * n / TWO_PI
    y = np.where(y > n / 2, y - n, y)
    return np.sort(y)


@dataclass
class BinStats:
    """Count, sum and sum of squares per bin; merge-able across workers."""

    count: int
    total: np.ndarray
    squares: np.ndarray

    @classmethod
    def empty(cls, bins):
        return cls(0, np.zeros(bins), np.zeros(bins))

    def add(self, values):
        values = np.atleast_2d(values)
        self.count += values.shape[0]
        self.total += values.sum(axis=0)
        self.squares += (values**2).sum(axis=0)
        return self

    def merge(self, other):
        return BinStats(self.count + other.count, self.total + other.total, self.squares + other.squares)

    @property
    def mean(self):
        return self.total / self.count

    @property
    def stderr(self):
        var = (self.squares / self.count - self.mean**2) * self.count / max(self.count - 1, 1)
        return np.sqrt(np.maximum(var, 0.0) / self.count)


@dataclass
class CorrelationHistogram:
    edges: np.ndarray
    density: np.ndarray
    sigma: np.ndarray
    samples: int
    acc: BinStats = field(repr=False, default=None)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    def theory(self):
        return pair_correlation_theory(self.edges)


def pair_correlation_theory(edges):
    """Bin averages of 1 - sinc^2 by Gauss-Legendre quadrature."""
    x, w = np.polynomial.legendre.leggauss(16)
    lo, hi = edges[:-1, None], edges[1:, None]
    y = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    return 0.5 * (1 - kernel_sine(y) ** 2) @ w


def pair_counts(points, edges):
    """Per-sample pair density per bin: ordered pairs with |y_i - y_j| in the bin over 2 n h."""
    y = np.atleast_2d(points)
    S, n = y.shape
    d = np.abs(y[:, :, None] - y[:, None, :])
    # distance on the circle of circumference n
    d = np.minimum(d, n - d)
    iu = np.triu_indices(n, 1)
    d = d[:, iu[0], iu[1]]
    h = np.diff(edges)
    out = np.empty((S, h.size))
    for s in range(S):
        out[s] = np.histogram(d[s], edges)[0]
    # each unordered pair counts for the two ordered ones, over both signs of the lag
    return out * 2 / (2 * n * h[None, :])


def empirical_pair_correlation(samples, window=4.0, width=0.25, start=0.0, chunk=512, minimum=1000):
    """Histogram of pair distances of scaled points, normalized to the pair density.

    The error bars are standard errors over samples, so dependence between
    the pairs of one sample is accounted for.
    """
    samples = np.asarray(samples, dtype=float)
    if samples.shape[0] < minimum:
        raise InsufficientSamples(f"{samples.shape[0]} samples, need {minimum}")
    edges = np.arange(start, window + width / 2, width)
    acc = BinStats.empty(edges.size - 1)
    for i in range(0, samples.shape[0], chunk):
        acc.add(pair_counts(samples[i : i + chunk], edges))
    return CorrelationHistogram(edges, acc.mean, acc.stderr, samples.shape[0], acc)


def trace_moments(angle_samples, j_max):
    """Rows (j, mean |tr u^j|^2, standard error) for j = 1..j_max."""
    th = np.atleast_2d(np.asarray(angle_samples, dtype=float))
    n = th.shape[1]
    if 2 * j_max > n:
        raise WindowViolation(f"2 j = {2 * j_max} exceeds n = {n}")
    rows = []
    for j in range(1, j_max + 1):
        v = np.abs(np.exp(1j * j * th).sum(axis=1)) ** 2
        rows.append((j, float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))))
    return rows


def ks_statistic(x, cdf):
    x = np.sort(np.asarray(x, dtype=float))
    N = x.size
    F = cdf(x)
    i = np.arange(1, N + 1)
    return float(max(np.max(i / N - F), np.max(F - (i - 1) / N)))


def ks_pvalue(D, N):
    """Asymptotic Kolmogorov tail with the finite-sample scaling sqrt(N) + 0.12 + 0.11/sqrt(N)."""
    r = math.sqrt(N)
    return float(sst.kstwobign.sf((r + 0.12 + 0.11 / r) * D))


def ks_test(x, cdf, minimum=0):
    x = np.asarray(x, dtype=float)
    if x.size < max(minimum, 1):
        raise InsufficientSamples(f"{x.size} samples, need {minimum}")
    D = ks_statistic(x, cdf)
    return D, ks_pvalue(D, x.size)


def beta_cdf(n):
    """CDF of Beta(1, n-1): 1 - (1 - x)^{n-1}."""
    return lambda x: -np.expm1((n - 1) * np.log1p(-np.clip(x, 0.0, 1.0)))


def beta_delocalization_test(x, n, minimum=1000):
    return ks_test(x, beta_cdf(n), minimum)


def exp_cdf(x):
    return -np.expm1(-np.maximum(x, 0.0))


def two_sample_ks(x, y):
    r = sst.ks_2samp(x, y)
    return float(r.statistic), float(r.pvalue)


@dataclass
class EventFlags:
    n: int
    e0: bool
    e1: bool
    e2: bool
    e3_low: bool
    e3_high: bool
    min_gap: float
    max_gap: float

    @property
    def e3(self):
        return self.e3_low and self.e3_high


def gaps(angles):
    a = np.asarray(angles, dtype=float)
    return np.diff(np.append(a, a[0] + TWO_PI))


def event_flags(n, angles, mu, nu, eps=0.1):
    """Whether the step data at dimension n satisfies each event's condition."""
    g = gaps(angles) if len(angles) > 1 else np.array([TWO_PI])
    cap = n ** (-0.5 + eps)
    mu = np.asarray(mu)
    return EventFlags(
        n,
        bool(np.all(mu != 0) and nu != 0 and np.all(g > 0)),
        bool(abs(nu) <= cap),
        bool(np.abs(mu).max(initial=0.0) <= cap),
        bool(g.min() >= n ** (-5 / 3 - eps)),
        bool(g.max() <= n ** (-1 + eps)),
        float(g.min()),
        float(g.max()),
    )


def event_diagnostics(log, eps=0.1, n_min=64):
    """Flags per step and violation counts for n >= n_min.

    ``log`` yields (n, angles, mu, nu).  Returns (flags, summary) where the
    summary holds violation counts and the last violating dimension per event.
    """
    flags = [event_flags(n, a, m, v, eps) for n, a, m, v in log]
    return flags, summarize_events(flags, n_min)


def summarize_events(flags, n_min=64):
    summary = {}
    for name in ("e0", "e1", "e2", "e3_low", "e3_high"):
        bad = [f.n for f in flags if f.n >= n_min and not getattr(f, name)]
        summary[name] = {"violations": len(bad), "last": bad[-1] if bad else None}
    return summary


def write_csv(path, header, rows, meta=None):
    """CSV with '# key: value' metadata lines before the header."""
    with open(path, "w", newline="") as fh:
        for k, v in (meta or {}).items():
            fh.write(f"# {k}: {v}\n")
        w = csv.writer(fh)
        w.writerow(header)
        w.writerows(rows)
