"""Complex reflections r_{a,alpha}(x) = x - (1 - alpha) <x,a>/<a,a> a.

Vectors are plain one-dimensional complex numpy arrays.  The inner product
<u, v> = sum u_k conj(v_k) is linear in its first argument.
"""
from dataclasses import dataclass

import numpy as np

from .errors import DimMismatch, NonUnitInput, NonUnitPhase, ZeroAnchor

PHASE_TOL = 1e-12
UNIT_TOL = 1e-12
NEAR_IDENTITY = 1e-14


def as_vector(x):
    v = np.asarray(x, dtype=np.complex128)
    if v.ndim != 1 or v.size == 0:
        raise DimMismatch(f"expected a nonempty 1-d vector, got shape {v.shape}")
    return v


def inner(u, v):
    """<u, v>, linear in u and conjugate linear in v."""
    return complex(np.vdot(v, u))


@dataclass(frozen=True, eq=False)
class Reflection:
    """Immutable complex reflection acting on C^dim.

    ``anchor`` is None exactly when the reflection is the identity.
    """

    dim: int
    anchor: np.ndarray | None = None
    alpha: complex = 1.0 + 0.0j

    @property
    def is_identity(self):
        return self.anchor is None

    def __call__(self, x):
        return apply(self, x)

    def matrix(self):
        """Dense matrix of the map; meant for tests and oracles only."""
        if self.is_identity:
            return np.eye(self.dim, dtype=np.complex128)
        a = self.anchor
        return np.eye(self.dim, dtype=np.complex128) - (1 - self.alpha) * np.outer(a, a.conj()) / np.vdot(a, a).real


def identity(dim):
    return Reflection(int(dim))


def make_reflection(a, alpha):
    a = as_vector(a)
    alpha = complex(alpha)
    norm2 = np.vdot(a, a).real
    if not norm2 > 0:
        raise ZeroAnchor("reflection anchor must be nonzero")
    mod = abs(alpha)
    if abs(mod - 1) > PHASE_TOL:
        raise NonUnitPhase(f"|alpha| = {mod!r} is not 1")
    alpha /= mod
    if alpha == 1:
        return identity(a.size)
    a = a.copy()
    a.setflags(write=False)
    return Reflection(a.size, a, alpha)


def reflection_sending(e, m):
    """The unique reflection r with r(e) = m, for unit vectors e != m."""
    e = as_vector(e)
    m = as_vector(m)
    if e.size != m.size:
        raise DimMismatch(f"{e.size} != {m.size}")
    for name, v in (("e", e), ("m", m)):
        if abs(np.linalg.norm(v) - 1) > UNIT_TOL:
            raise NonUnitInput(f"{name} is not a unit vector")
    a = m - e
    if np.linalg.norm(a) < NEAR_IDENTITY:
        return identity(e.size)
    me = inner(m, e)
    alpha = -(1 - me) / (1 - me.conjugate())
    alpha /= abs(alpha)
    a.setflags(write=False)
    return Reflection(e.size, a, alpha)


def apply(r, x):
    x = as_vector(x)
    if x.size != r.dim:
        raise DimMismatch(f"reflection on C^{r.dim} applied to vector of length {x.size}")
    if r.is_identity:
        return x.copy()
    a = r.anchor
    coef = (1 - r.alpha) * np.vdot(a, x) / np.vdot(a, a).real
    return x - coef * a


def compose_apply(rs, x):
    """Apply r_n o ... o r_1 to x, each r_j acting on the first j coordinates."""
    out = as_vector(x).copy()
    for r in rs:
        if r.dim > out.size:
            raise DimMismatch(f"reflection on C^{r.dim} exceeds ambient dimension {out.size}")
        out[: r.dim] = apply(r, out[: r.dim])
    return out
