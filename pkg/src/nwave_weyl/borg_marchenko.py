"""Local Borg-Marchenko check.

Two Weyl functions whose inverses differ by ``exp(-ilzD) O(z)`` along a ray
in the lower half-plane determine potentials that coincide on ``(0, l)``.
The ray bound is tested numerically; when it holds, both tables are inverted
on ``[0, l]`` and the gaps in ``Pi`` and ``zeta`` are reported. The verdict
is a numerical indication, not a proof.
"""
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import _quadrature as quad
from .errors import DomainMismatch, InvalidInput
from .inverse_solver import compute_Pi, inversion_pipeline
from .spectral_core import SpectralLine, WeylTable, as_spectrum

SAME = "SAME_ON_(0,l)"
DIFFERENT = "DIFFERENT"


@dataclass(frozen=True)
class RaySpec:
    """Samples ``z = -t (c + i)`` so that ``c Im z = Re z``; ``t`` increasing."""

    c: float
    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        if t.size < 2 or np.any(np.diff(t) <= 0) or np.any(t <= 0):
            raise InvalidInput("ray samples must be positive and strictly increasing")
        object.__setattr__(self, "t", t)

    @classmethod
    def default(cls, t_min=5.0, t_max=100.0, n=60, c=0.0):
        return cls(c, np.geomspace(t_min, t_max, n))

    @property
    def z(self):
        return -self.t * (self.c + 1j)

    @property
    def modulus(self):
        return np.abs(self.z)


def weyl_inverse(fn, z):
    inv = getattr(fn, "inverse", None)
    if inv is not None:
        return inv(z)
    return np.linalg.inv(fn(z))


class BumpPerturbedWeyl:
    """Weyl function whose ``Pi`` differs from that of ``base`` by a bump.

    ``phi^{-1} = phi_base^{-1} + i z D int_a^b exp(-i y z D) dPi(y) dy`` with
    ``dPi(y) = B sin^4(pi (y - a) / (b - a))``, so ``Pi = Pi_base + dPi`` and
    the two functions share ``Pi`` on ``(0, a)``.
    """

    def __init__(self, base, D, B, a, b):
        self.base = base
        self.D = as_spectrum(D)
        self.B = np.asarray(B, dtype=complex)
        self.a = float(a)
        self.b = float(b)
        self.M_bound = getattr(base, "M_bound", 0.0)
        if self.b <= self.a or self.a < 0:
            raise InvalidInput("bump needs 0 <= a < b")

    def bump(self, y):
        y = np.asarray(y, dtype=float)
        w = self.b - self.a
        inside = (y >= self.a) & (y <= self.b)
        prof = np.where(inside, np.sin(np.pi * (y - self.a) / w) ** 4, 0.0)
        return prof[..., None, None] * self.B

    def _laplace(self, s):
        # int_a^b exp(-s y) sin^4(pi (y-a)/w) dy in closed form
        w = self.b - self.a
        om = 2 * np.pi / w
        return (np.exp(-s * self.a) * -np.expm1(-s * w)
                * 1.5 * om ** 4 / (s * (s ** 2 + om ** 2) * (s ** 2 + 4 * om ** 2)))

    def delta_inverse(self, z):
        z = np.asarray(z, dtype=complex)
        d = self.D.entries
        s = 1j * z[..., None] * d
        row = s * self._laplace(s)
        return row[..., :, None] * self.B

    def inverse(self, z):
        return weyl_inverse(self.base, z) + self.delta_inverse(z)

    def __call__(self, z):
        return np.linalg.inv(self.inverse(z))


def inverse_difference(phi1, phi2, z):
    """``phi1^{-1} - phi2^{-1}``, exact when both share a perturbation base."""
    if phi1 is phi2:
        return np.zeros_like(weyl_inverse(phi1, z))
    d1 = getattr(phi1, "delta_inverse", None)
    d2 = getattr(phi2, "delta_inverse", None)
    base1 = getattr(phi1, "base", None)
    base2 = getattr(phi2, "base", None)
    if d1 is not None and base1 is phi2:
        return d1(z)
    if d2 is not None and base2 is phi1:
        return -d2(z)
    if d1 is not None and d2 is not None and base1 is base2:
        return d1(z) - d2(z)
    return weyl_inverse(phi1, z) - weyl_inverse(phi2, z)


@dataclass
class RayReport:
    l: float
    slope: float
    bounded: bool
    ratio: np.ndarray
    modulus: np.ndarray


def ray_difference_bound(phi1, phi2, l, ray, D, slope_tol=0.1):
    """``|| exp(ilzD) (phi1^{-1} - phi2^{-1}) || / |z|`` along the ray.

    Bounded iff the log-log slope over the top decade of ``|z|`` is at most
    ``slope_tol``.
    """
    D = as_spectrum(D)
    z = ray.z
    for fn in (phi1, phi2):
        M = float(getattr(fn, "M_bound", 0.0))
        if np.any(z.imag >= -M):
            raise DomainMismatch(f"ray samples must satisfy Im z < -{M}")
    diff = inverse_difference(phi1, phi2, z)
    scaled = np.exp(1j * l * z[:, None] * D.entries)[..., None] * diff
    r = quad.frob(scaled) / np.abs(z)
    mod = np.abs(z)
    top = mod >= mod[-1] / 10.0
    if np.all(r[top] == 0):
        slope = -np.inf
    else:
        slope = quad.loglog_slope(mod[top], r[top])
    return RayReport(l, slope, bool(slope <= slope_tol), r, mod)


def F_diagnostic(Pi1, Pi2, x, l, z, D):
    """``F(z) = exp(ilzD) int_0^l exp(-ixzD) (Pi1 - Pi2) dx`` by trapezoid quadrature.

    ``Pi1``, ``Pi2`` are sampled on the uniform grid ``x`` covering ``[0, l]``.
    Returns ``(F, sup_norm)``.
    """
    d = as_spectrum(D).entries
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    n = int(round(l / (x[1] - x[0])))
    xs = x[:n + 1]
    diff = (Pi1 - Pi2)[:n + 1]
    w = quad.trapezoid_weights(xs.size, xs[1] - xs[0])
    # rows scale by exp(i (l - x) z d_k)
    ph = np.exp(1j * (l - xs)[None, :, None] * z[:, None, None] * d[None, None, :])
    F = np.einsum("x,zxk,xkj->zkj", w, ph, diff)
    return F, float(np.max(quad.frob(F)))


@dataclass
class PipelineConfig:
    eta: float = 3.0
    half_width: float = 200.0
    step: float = 0.05
    M_bound: float = 0.0
    n_per_unit: int = 100
    zeta_tol: float = 0.05
    pi_tol: float = 0.05
    slope_tol: float = 0.1
    ray: Optional[RaySpec] = None
    F_samples: np.ndarray = field(default_factory=lambda: -1j * np.linspace(3.5, 10.0, 14))


@dataclass
class Verdict:
    verdict: str
    ray_slope: float
    F_sup: Optional[float]
    pi_gap: Optional[float]
    zeta_gap: Optional[float]
    l: float
    heuristic: bool = True

    def as_dict(self):
        return {"ray_slope": self.ray_slope, "F_sup": self.F_sup, "pi_gap": self.pi_gap,
                "zeta_gap": self.zeta_gap, "verdict": self.verdict, "l": self.l,
                "heuristic": self.heuristic}


def bm_verdict(phi1, phi2, l, D, cfg=None):
    """Decide numerically whether the two Weyl functions give the same potential on ``(0, l)``."""
    D = as_spectrum(D)
    cfg = cfg or PipelineConfig()
    ray = cfg.ray or RaySpec.default(t_min=max(5.0, 2 * cfg.eta))
    rep = ray_difference_bound(phi1, phi2, l, ray, D, cfg.slope_tol)
    if not rep.bounded:
        return Verdict(DIFFERENT, rep.slope, None, None, None, l)
    M = max(cfg.M_bound, getattr(phi1, "M_bound", 0.0), getattr(phi2, "M_bound", 0.0))
    line = SpectralLine.uniform(cfg.eta, cfg.half_width, cfg.step, M_bound=M)
    t1 = WeylTable(line, phi1(line.z))
    t2 = WeylTable(line, phi2(line.z)) if phi2 is not phi1 else t1
    N = max(4, int(round(cfg.n_per_unit * l)))
    r1 = inversion_pipeline(t1, D, l, N)
    r2 = inversion_pipeline(t2, D, l, N) if t2 is not t1 else r1
    x, P1, _, _ = r1.pi.coarse()
    _, P2, _, _ = r2.pi.coarse()
    pi_gap = float(np.max(quad.frob(P1 - P2)))
    _, F_sup = F_diagnostic(P1, P2, x, l, cfg.F_samples, D)
    z1, z2 = r1.zeta.values, r2.zeta.values
    scale = max(float(np.max(quad.frob(z2))), float(np.max(quad.frob(z1))), 1e-12)
    zeta_gap = float(np.max(quad.frob(z1 - z2))) / scale
    verdict = SAME if zeta_gap <= cfg.zeta_tol else DIFFERENT
    return Verdict(verdict, rep.slope, F_sup, pi_gap, zeta_gap, l)
