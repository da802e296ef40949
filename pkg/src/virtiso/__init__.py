"""Eigenvalues and eigenvectors along towers of random unitary matrices.

u_{n+1} = r_{n+1} diag(u_n, 1) for a random complex reflection r_{n+1}; the
spectrum of u_{n+1} follows from that of u_n through a secular equation,
so towers can be followed far beyond what dense eigensolvers reach.
"""
from .errors import VirtisoError
from .haar import UpdateCoeffs, angle_samples, coeffs_for_step
from .kernels import BACKEND
from .runner import RunConfig, Trajectory, run_ensemble, run_trajectory
from .secular import Mode, SpectralState, initial_state, solve_secular, step

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "Mode",
    "RunConfig",
    "SpectralState",
    "Trajectory",
    "UpdateCoeffs",
    "VirtisoError",
    "angle_samples",
    "coeffs_for_step",
    "initial_state",
    "run_ensemble",
    "run_trajectory",
    "solve_secular",
    "step",
]
