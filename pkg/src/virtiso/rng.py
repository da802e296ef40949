"""Counter-based random streams.

Every draw is addressed by (seed, dimension step, purpose).  The Philox
counter is set to [0, step, purpose, 0], so a trajectory resumed from a
checkpoint reproduces the same draws, and distinct (step, purpose) pairs
never share a counter block.
"""
import numpy as np
from numpy.random import Philox, SeedSequence

GENERATOR_NAME = "philox4x64-10/counter[0,step,purpose,0]/key=SeedSequence(seed)/box-muller"

SPHERE = 1
COEFFS = 2
PHASES = 3
AUX = 4
BATCH = 5

_keys = {}


def _key(seed):
    key = _keys.get(seed)
    if key is None:
        if len(_keys) > 4096:
            _keys.clear()
        key = SeedSequence(int(seed) & (2**64 - 1)).generate_state(2, np.uint64)
        _keys[seed] = key
    return key


class RngStream:
    """Independent stream for one (seed, step, purpose) address."""

    def __init__(self, seed, step, purpose=AUX):
        self.seed = int(seed)
        self.step = int(step)
        self.purpose = int(purpose)
        self._bg = Philox(key=_key(self.seed), counter=[0, self.step, self.purpose, 0])

    @property
    def stream_id(self):
        return (self.step << 8) | self.purpose

    def raw(self, size):
        return self._bg.random_raw(size)

    def uniforms(self, size):
        """Doubles in [0, 1) built from the top 53 bits of each raw word."""
        return (self.raw(size) >> np.uint64(11)) * (1.0 / 9007199254740992.0)

    def normals(self, size):
        """Standard normals by the Box-Muller transform."""
        half = (size + 1) // 2
        u = self.uniforms(2 * half)
        r = np.sqrt(-2.0 * np.log1p(-u[:half]))
        phi = 2 * np.pi * u[half:]
        z = np.empty(2 * half)
        z[0::2] = r * np.cos(phi)
        z[1::2] = r * np.sin(phi)
        return z[:size]

    def complex_normals(self, size):
        """Standard complex Gaussians, E|z|^2 = 1."""
        z = self.normals(2 * size)
        return (z[0::2] + 1j * z[1::2]) * np.sqrt(0.5)

    def generator(self):
        """numpy Generator over the same bit stream, for library samplers."""
        return np.random.Generator(self._bg)

    def phases(self, size):
        return np.exp(2j * np.pi * self.uniforms(size))


def stream(seed, step, purpose=AUX):
    return RngStream(seed, step, purpose)
