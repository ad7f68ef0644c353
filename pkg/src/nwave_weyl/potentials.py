"""Test potentials: constant, bump and seeded random band-limited profiles."""
import numpy as np

from .spectral_core import PotentialGrid, skew_project

DEFAULT_SPECTRA = {2: (2.0, 1.0), 3: (3.0, 2.0, 1.0)}


def constant_potential(q, L, N):
    """``[[0, -q], [conj(q), 0]]`` on ``[0, L]``."""
    q = complex(q)
    a = np.array([[0, -q], [np.conj(q), 0]], dtype=complex)
    return PotentialGrid.constant(a, L, N)


def taper(x, L):
    """``sin(pi x / L)^4``: vanishes with three derivatives at both ends."""
    x = np.asarray(x, dtype=float)
    inside = (x >= 0) & (x <= L)
    return np.where(inside, np.sin(np.pi * x / L) ** 4, 0.0)


def bump_potential(amplitude, L, N, m=2, a=0.0, b=None, entry=(0, 1)):
    """Skew-Hermitian bump supported on ``[a, b]`` in one off-diagonal pair."""
    b = L if b is None else b
    k, j = entry
    unit = np.zeros((m, m), dtype=complex)
    unit[k, j] = -1.0
    unit[j, k] = 1.0

    def f(x):
        x = np.asarray(x, dtype=float)
        prof = amplitude * taper(x - a, b - a)
        return prof[..., None, None] * unit

    return PotentialGrid.from_function(f, L, N)


class RandomPotential:
    """Band-limited trigonometric sum in the upper triangle, reflected to a
    skew-Hermitian zero-diagonal matrix and tapered to zero at both ends.

    Scaled so that the sup over ``x`` of the Frobenius norm equals ``sup_norm``.
    """

    def __init__(self, m, L, seed, modes=3, sup_norm=0.4):
        rng = np.random.default_rng(seed)
        self.m = m
        self.L = float(L)
        iu = np.triu_indices(m, 1)
        self.pairs = list(zip(*iu))
        npair = len(self.pairs)
        self.freq = np.arange(1, modes + 1)
        self.coef = (rng.standard_normal((npair, modes, 2)) @ np.array([1.0, 1j])) / self.freq
        self.phase = rng.uniform(0, 2 * np.pi, (npair, modes))
        self.scale = 1.0
        probe = np.linspace(0.0, self.L, 2001)
        peak = float(np.max(np.sqrt(np.sum(np.abs(self._raw(probe)) ** 2, axis=(-2, -1)))))
        self.scale = sup_norm / peak

    def _raw(self, x):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape + (self.m, self.m), dtype=complex)
        arg = 2 * np.pi * x[..., None] / self.L
        t = taper(x, self.L)
        for p, (k, j) in enumerate(self.pairs):
            v = np.sum(self.coef[p] * np.cos(self.freq * arg + self.phase[p]), axis=-1) * t
            out[..., k, j] = -v
            out[..., j, k] = np.conj(v)
        return out

    def __call__(self, x):
        return skew_project(self.scale * self._raw(x))


def random_potential(m, L, N, seed, modes=3, sup_norm=0.4):
    return PotentialGrid.from_function(RandomPotential(m, L, seed, modes, sup_norm), L, N)
