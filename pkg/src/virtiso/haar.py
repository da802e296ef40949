"""Haar sampling: spheres, update coefficients and explicit matrix towers."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from . import rng as rngmod
from .errors import DegenerateCoefficient, DimMismatch, NonConvergence
from .reflect import Reflection, reflection_sending

DEGENERATE = 1e-300


def sample_sphere(n, rng):
    """Uniform point on the unit sphere of C^n."""
    if n < 1:
        raise DimMismatch("sphere dimension must be positive")
    while True:
        z = rng.complex_normals(n)
        norm = np.linalg.norm(z)
        if norm > 0:
            return z / norm


@dataclass(frozen=True, eq=False)
class UpdateCoeffs:
    """Coordinates (mu_1..mu_n, nu) of the next column in the current eigenbasis."""

    mu: np.ndarray
    nu: complex

    @property
    def n(self):
        return self.mu.size

    @property
    def weights(self):
        return np.abs(self.mu) ** 2

    def check(self):
        norm = np.sum(np.abs(self.mu) ** 2) + abs(self.nu) ** 2
        if abs(norm - 1) > 1e-12:
            raise DegenerateCoefficient(f"coefficients have squared norm {norm!r}")
        if np.any(np.abs(self.mu) < DEGENERATE) or abs(1 - self.nu) < DEGENERATE:
            raise DegenerateCoefficient("a coefficient vanishes or nu = 1")
        return self


def _nondegenerate(x):
    return np.all(np.abs(x[:-1]) >= DEGENERATE) and abs(1 - x[-1]) >= DEGENERATE


def sample_update_coeffs(n, rng):
    """(mu, nu) uniform on the unit sphere of C^{n+1}.

    Since the next column is uniform and independent of the current
    eigenbasis, its coordinates in that basis are again uniform.
    """
    for attempt in range(2):
        x = sample_sphere(n + 1, rng)
        if _nondegenerate(x):
            return UpdateCoeffs(x[:-1], complex(x[-1]))
    raise DegenerateCoefficient(f"degenerate coefficients twice at dimension {n}")


def coeffs_for_step(seed, n):
    return sample_update_coeffs(n, rngmod.stream(seed, n, rngmod.COEFFS))


def extend_matrix(u, r):
    """r . diag(u, 1) for a dense u of size n and a reflection on C^{n+1}."""
    n = u.shape[0]
    if r.dim != n + 1:
        raise DimMismatch(f"reflection on C^{r.dim} cannot extend a {n}x{n} matrix")
    out = np.zeros((n + 1, n + 1), dtype=np.complex128)
    out[:n, :n] = u
    out[n, n] = 1
    if r.is_identity:
        return out
    a = r.anchor
    out -= np.outer((1 - r.alpha) * a / np.vdot(a, a).real, a.conj() @ out)
    return out


def matrix_from_reflections(rs):
    u = np.zeros((0, 0), dtype=np.complex128)
    for r in rs:
        u = extend_matrix(u, r)
    return u


def next_matrix(reflections, rng, u=None):
    """Append r_{n+1} sending e_{n+1} to a uniform x_{n+1}; return (list, u_{n+1}).

    ``u`` may carry the current dense matrix to avoid rebuilding it.
    """
    n = len(reflections)
    if u is None:
        u = matrix_from_reflections(reflections)
    x = sample_sphere(n + 1, rng)
    e = np.zeros(n + 1, dtype=np.complex128)
    e[n] = 1
    r = reflection_sending(e, x)
    return list(reflections) + [r], extend_matrix(u, r)


class MatrixTower:
    """Explicit tower u_1, u_2, ... driven by seeded sphere draws."""

    def __init__(self, seed):
        self.seed = seed
        self.reflections: list[Reflection] = []
        self.u = np.zeros((0, 0), dtype=np.complex128)

    @property
    def n(self):
        return len(self.reflections)

    def step(self):
        rng = rngmod.stream(self.seed, self.n, rngmod.SPHERE)
        self.reflections, self.u = next_matrix(self.reflections, rng, self.u)
        return self.u

    @property
    def last_column(self):
        return self.u[:, -1]


BATCH_CHUNK = 4096


def angle_samples(seed, count, n, chunk=BATCH_CHUNK, impl=None):
    """Eigenangles of u_n for ``count`` independent COEFF-mode towers, shape (count, n).

    Chunk c draws from stream (seed, c, BATCH): first the angles of u_1,
    then the sphere points of every step.  The rows are Haar samples but
    are not the towers run_trajectory would produce for any seed.
    """
    if n < 1:
        raise DimMismatch("dimension must be positive")
    total = n * (n + 1) // 2 - 1
    out = np.empty((count, n))
    for c, s0 in enumerate(range(0, count, chunk)):
        size = min(chunk, count - s0)
        rng = rngmod.stream(seed, c, rngmod.BATCH)
        theta0 = 2 * np.pi * rng.uniforms(size)
        theta0[theta0 == 0] = 2 * np.pi * np.finfo(float).eps
        Z = rng.complex_normals(size * total).reshape(size, total)
        ang, status = kernels.evolve_batch(theta0, Z, n, impl=impl)
        if np.any(status != 0):
            raise NonConvergence(f"{int(np.sum(status != 0))} towers failed in chunk {c}")
        out[s0 : s0 + size] = ang
    return out
