"""Backend selection for the root-solve kernels.

The compiled numba kernels are used unless VIRTISO_DISABLE_NUMBA=1 is set
in the environment (or numba cannot be imported), in which case the pure
numpy versions run instead.
"""
import os

import numpy as np

from . import _numpy

BACKEND = "numpy"
_impl = _numpy
if os.environ.get("VIRTISO_DISABLE_NUMBA", "") not in ("1", "true", "yes"):
    try:
        from . import _numba

        _impl = _numba
        BACKEND = "numba"
    except ImportError:  # pragma: no cover
        pass

NEAR = _numpy.NEAR
OK = 0
BRACKET = 1
NONCONV = 2


def backend(name=None):
    """The kernel module for ``name`` ("numba" or "numpy"), default the active one."""
    if name is None:
        return _impl
    if name == "numpy":
        return _numpy
    from . import _numba

    return _numba


def solve_arcs(P, W, C, A=None, tol=1e-13, maxit=200, impl=None, blocks=True):
    """Roots of sum W cot((P - t)/2) + C, one per arc, and the Cauchy sums
    S[l, k] = sum_j A[l, j] / (exp(i P[j]) - exp(i t_k)).

    Returns a dict with t, xl, xr, h, resid, iters, passes, status and S.
    """
    k = backend(impl)
    P = np.ascontiguousarray(P, dtype=np.float64)
    W = np.ascontiguousarray(W, dtype=np.float64)
    if A is None:
        A = np.zeros((0, P.size), dtype=np.complex128)
    A = np.atleast_2d(A)
    AR = np.ascontiguousarray(A.real, dtype=np.float64)
    AI = np.ascontiguousarray(A.imag, dtype=np.float64)
    t, xl, xr, h, res, it, ps, st, SR, SI = k.solve_arcs(P, W, float(C), AR, AI, float(tol), int(maxit), NEAR, blocks)
    return {
        "t": t,
        "xl": xl,
        "xr": xr,
        "h": h,
        "resid": res,
        "iters": it,
        "passes": ps,
        "status": st,
        "S": SR + 1j * SI,
    }


def cauchy_apply(lam, z, w, impl=None):
    """sum_a w[a] / (lam[i] - z[a]) for every i, by direct differences."""
    k = backend(impl)
    lam = np.asarray(lam, dtype=np.complex128)
    z = np.asarray(z, dtype=np.complex128)
    w = np.asarray(w, dtype=np.complex128)
    c = np.ascontiguousarray
    r, i = k.cauchy_apply(c(lam.real), c(lam.imag), c(z.real), c(z.imag), c(w.real), c(w.imag))
    return r + 1j * i


def evolve_batch(theta0, Z, n, tol=1e-13, maxit=200, impl=None):
    """(angles, status) at dimension n for towers started at theta0 and driven by Z."""
    k = backend(impl)
    theta0 = np.ascontiguousarray(theta0, dtype=np.float64)
    Z = np.ascontiguousarray(Z, dtype=np.complex128)
    return k.evolve_batch(theta0, Z, int(n), float(tol), int(maxit), NEAR)
