"""Direct problem for the system ``Y_x = (i z D - zeta(x)) Y`` on the semi-axis.

Domain types for the spectrum, sampled potentials and Weyl tables, the
fundamental solution, closed-form and integral-equation Weyl functions, the
first asymptotic coefficient ``M_1`` and Weyl-table validation.
"""
import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import CubicSpline
from scipy.linalg import expm

from . import _quadrature as quad
from .errors import (BranchPointOnGrid, ContractionFailure, DiscretizationWarning,
                     IntegrationFailure, InvalidInput, NotInvertible)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DiagonalSpectrum:
    """Diagonal matrix ``D`` with positive, pairwise distinct entries."""

    entries: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.entries, dtype=float).ravel()
        if d.size < 2:
            raise InvalidInput("D needs at least two entries")
        if np.any(d <= 0) or not np.all(np.isfinite(d)):
            raise InvalidInput("entries of D must be positive and finite")
        if len(np.unique(d)) != d.size:
            raise InvalidInput("entries of D must be pairwise distinct")
        object.__setattr__(self, "entries", d)

    @property
    def m(self):
        return self.entries.size

    @property
    def strict_ordering(self):
        """True when ``d_1 > d_2 > ... > d_m`` (required by the ordered theory)."""
        return bool(np.all(np.diff(self.entries) < 0))

    @property
    def matrix(self):
        return np.diag(self.entries).astype(complex)

    @property
    def min_gap(self):
        d = self.entries
        gaps = np.abs(d[:, None] - d[None, :])
        return float(np.min(gaps[~np.eye(d.size, dtype=bool)]))

    def commutator(self, a):
        """``[D, a]`` for ``a`` with trailing ``(m, m)`` axes."""
        d = self.entries
        return (d[:, None] - d[None, :]) * a

    def __len__(self):
        return self.m


def as_spectrum(D):
    return D if isinstance(D, DiagonalSpectrum) else DiagonalSpectrum(D)


def skew_project(a):
    """Closest skew-Hermitian zero-diagonal matrix (trailing axes)."""
    a = np.asarray(a, dtype=complex)
    p = 0.5 * (a - np.conj(np.swapaxes(a, -1, -2)))
    idx = np.arange(a.shape[-1])
    p[..., idx, idx] = 0
    return p


@dataclass
class PotentialGrid:
    """Potential ``zeta`` sampled on a uniform grid of ``[0, L]``.

    ``func``, when given, evaluates the potential exactly at arbitrary points
    (used by the one-step integrators); otherwise a cubic spline of the
    samples is used.
    """

    x: np.ndarray
    values: np.ndarray
    func: Optional[Callable] = None
    _spline: Optional[CubicSpline] = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        if self.x.size == 0 or self.values.size == 0:
            raise InvalidInput("empty potential grid")
        if self.values.shape[0] != self.x.size or self.values.ndim != 3:
            raise InvalidInput("values must have shape (len(x), m, m)")
        if self.x.size > 2 and not np.allclose(np.diff(self.x), self.x[1] - self.x[0],
                                               rtol=1e-9, atol=1e-12):
            raise InvalidInput("x grid must be uniform")

    @classmethod
    def from_function(cls, f, L, N):
        x = np.linspace(0.0, L, N + 1)
        return cls(x, np.asarray(f(x), dtype=complex), func=f)

    @classmethod
    def zero(cls, m, L, N):
        def f(x):
            return np.zeros(np.shape(x) + (m, m), dtype=complex)
        return cls.from_function(f, L, N)

    @classmethod
    def constant(cls, a, L, N):
        a = np.asarray(a, dtype=complex)

        def f(x):
            return np.broadcast_to(a, np.shape(x) + a.shape).copy()
        return cls.from_function(f, L, N)

    @property
    def m(self):
        return self.values.shape[-1]

    @property
    def N(self):
        return self.x.size - 1

    @property
    def L(self):
        return float(self.x[-1])

    @property
    def h(self):
        return float(self.x[1] - self.x[0]) if self.x.size > 1 else 0.0

    def sup_norm(self):
        return float(np.max(quad.frob(self.values)))

    def l1_norm(self):
        return float(np.trapezoid(quad.frob(self.values), self.x))

    def __call__(self, x):
        """Evaluate on arbitrary points; zero outside ``[0, L]``."""
        x = np.asarray(x, dtype=float)
        if self.func is not None:
            out = np.asarray(self.func(x), dtype=complex)
        else:
            if self._spline is None:
                self._spline = CubicSpline(self.x, self.values, axis=0)
            out = self._spline(x)
        outside = (x < self.x[0] - 1e-14) | (x > self.x[-1] + 1e-14)
        if np.any(outside):
            out = np.array(out)
            out[outside] = 0
        return out

    def restrict(self, n):
        """Grid restricted to the first ``n + 1`` nodes."""
        return PotentialGrid(self.x[:n + 1], self.values[:n + 1], func=self.func)


@dataclass(frozen=True)
class SpectralLine:
    """Horizontal line ``z = lambda - i eta`` sampled on a symmetric grid."""

    eta: float
    lam: np.ndarray
    M_bound: float = 0.0

    def __post_init__(self):
        lam = np.asarray(self.lam, dtype=float)
        object.__setattr__(self, "lam", lam)
        if self.eta <= self.M_bound:
            raise InvalidInput(f"eta={self.eta} must exceed M_bound={self.M_bound}")
        if lam.size < 3:
            raise InvalidInput("lambda grid too short")
        step = np.diff(lam)
        if np.any(step <= 0) or not np.allclose(step, step[0], rtol=1e-8):
            raise InvalidInput("lambda grid must be uniform and increasing")
        if not np.isclose(lam[0], -lam[-1], atol=1e-9 * abs(lam[-1])):
            raise InvalidInput("lambda grid must be symmetric about 0")
        if lam[-1] < 10 * self.eta - 1e-9:
            raise InvalidInput("half-width must be at least 10 * eta")

    @classmethod
    def uniform(cls, eta, half_width, step, M_bound=0.0):
        n = int(round(half_width / step))
        return cls(eta, np.linspace(-n * step, n * step, 2 * n + 1), M_bound)

    @property
    def z(self):
        return self.lam - 1j * self.eta

    @property
    def step(self):
        return float(self.lam[1] - self.lam[0])

    @property
    def half_width(self):
        return float(self.lam[-1])

    @property
    def weights(self):
        return quad.trapezoid_weights(self.lam.size, self.step)


@dataclass
class WeylTable:
    """Samples of a Weyl function on a :class:`SpectralLine`."""

    line: SpectralLine
    phi: np.ndarray
    alpha: Optional[np.ndarray] = None
    source: str = "closed-form"
    alpha_skew: bool = False

    def __post_init__(self):
        self.phi = np.asarray(self.phi, dtype=complex)
        if self.phi.ndim != 3 or self.phi.shape[0] != self.line.lam.size:
            raise InvalidInput("phi must have shape (len(lambda), m, m)")
        if self.alpha is not None:
            self.alpha = np.asarray(self.alpha, dtype=complex)

    @property
    def m(self):
        return self.phi.shape[-1]

    @property
    def z(self):
        return self.line.z

    @property
    def lam(self):
        return self.line.lam

    def inverse(self):
        det = np.linalg.det(self.phi)
        bad = np.abs(det) < 1e-300
        if np.any(bad):
            lam = float(self.lam[np.argmax(bad)])
            raise NotInvertible(f"phi is singular at lambda={lam}", lam=lam)
        return np.linalg.inv(self.phi)


@dataclass
class MatrixWave:
    """Fundamental solution ``w(x, z)`` on a grid for one or more ``z``."""

    x: np.ndarray
    values: np.ndarray
    z: complex
    error_estimate: float = 0.0


@dataclass
class MCoefficients:
    x: np.ndarray
    M1: np.ndarray
    skew_defect: float = 0.0


# ---------------------------------------------------------------------------
# potentials
# ---------------------------------------------------------------------------

@dataclass
class PotentialReport:
    hermitian_violation: float
    diagonal_violation: float
    sup_norm: float
    passed: bool


def validate_potential(zeta, tol=1e-12):
    """Check skew-Hermitian symmetry and the zero diagonal on every node."""
    if zeta is None or np.size(zeta.values) == 0:
        raise InvalidInput("empty potential grid")
    v = zeta.values
    herm = float(np.max(np.abs(v + np.conj(np.swapaxes(v, -1, -2)))))
    diag = float(np.max(np.abs(np.diagonal(v, axis1=-2, axis2=-1))))
    return PotentialReport(herm, diag, zeta.sup_norm(), herm <= tol and diag <= tol)


def _require_valid(zeta):
    rep = validate_potential(zeta)
    if not rep.passed:
        raise InvalidInput(
            f"potential violates skew symmetry / zero diagonal "
            f"(hermitian {rep.hermitian_violation:.2e}, diagonal {rep.diagonal_violation:.2e})")


def default_eta(zeta):
    """Default line height ``max(2 sup|zeta|, 1) + 1``."""
    return max(2.0 * zeta.sup_norm(), 1.0) + 1.0


# ---------------------------------------------------------------------------
# fundamental solutions
# ---------------------------------------------------------------------------

def _generator(D, zeta_x, z):
    d = D.entries
    z = np.asarray(z)
    g = -np.asarray(zeta_x, dtype=complex)
    g = np.broadcast_to(g, z.shape + g.shape[-2:]).copy()
    idx = np.arange(d.size)
    g[..., idx, idx] += 1j * z[..., None] * d
    return g


def _rk4_run(D, zeta, z, x0, h, nsteps):
    m = D.m
    w = np.eye(m, dtype=complex)
    out = np.empty((nsteps + 1, m, m), dtype=complex)
    out[0] = w
    for n in range(nsteps):
        x = x0 + n * h
        z1 = zeta(np.array(x))
        zm = zeta(np.array(x + 0.5 * h))
        z2 = zeta(np.array(x + h))
        g1, gm, g2 = (_generator(D, zz, z) for zz in (z1, zm, z2))
        k1 = g1 @ w
        k2 = gm @ (w + 0.5 * h * k1)
        k3 = gm @ (w + 0.5 * h * k2)
        k4 = g2 @ (w + h * k3)
        w = w + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if not np.all(np.isfinite(w)):
            raise IntegrationFailure(f"non-finite solution at x={x + h}")
        out[n + 1] = w
    return out


def fundamental_solution(D, zeta, z, richardson=True):
    """Normalized fundamental solution ``w(x, z)``, ``w(0, z) = I``, on ``zeta.x``.

    Classical fourth-order Runge-Kutta with the step of the potential grid;
    with ``richardson=True`` a half-step rerun supplies ``error_estimate``
    (max relative difference on the grid nodes).
    """
    D = as_spectrum(D)
    _require_valid(zeta)
    h = zeta.h
    if h <= 0:
        raise InvalidInput("potential grid needs at least two nodes")
    if np.finfo(float).eps * 10 > h:
        raise IntegrationFailure("step underflow")
    z = complex(z)
    w = _rk4_run(D, zeta, z, zeta.x[0], h, zeta.N)
    err = 0.0
    if richardson:
        fine = _rk4_run(D, zeta, z, zeta.x[0], 0.5 * h, 2 * zeta.N)[::2]
        scale = np.maximum(quad.frob(fine), 1.0)
        err = float(np.max(quad.frob(fine - w) / scale))
        w = fine + (fine - w) / 15.0
    return MatrixWave(zeta.x.copy(), w, z, err)


def _magnus_steps(D, zeta, z, x0, h, nsteps):
    """Yield one-step propagators (batched over ``z``) of the fourth-order Magnus scheme."""
    c = np.sqrt(3.0) / 6.0
    for n in range(nsteps):
        x = x0 + n * h
        g1 = _generator(D, zeta(np.array(x + (0.5 - c) * h)), z)
        g2 = _generator(D, zeta(np.array(x + (0.5 + c) * h)), z)
        omega = 0.5 * h * (g1 + g2) + (np.sqrt(3.0) / 12.0) * h * h * (g2 @ g1 - g1 @ g2)
        yield expm(omega)


def transported_weyl(D, zeta, z, phi, x_end=None, substeps=1):
    """``F(x, z) = w(x, z) phi(z) exp(-i x z D)`` on the nodes of ``zeta`` up to ``x_end``.

    Batched over ``z`` (shape ``(nz,)``) with ``phi`` of shape ``(nz, m, m)``.
    Uses an exponential fourth-order Magnus integrator so that large ``|z|``
    stays accurate; the diagonal exponential is applied every step to keep the
    product bounded. Returns an array ``(n_nodes, nz, m, m)``.
    """
    D = as_spectrum(D)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    F = np.array(np.broadcast_to(phi, z.shape + (D.m, D.m)), dtype=complex)
    n_end = zeta.N if x_end is None else int(round(x_end / zeta.h))
    h = zeta.h / substeps
    out = np.empty((n_end + 1,) + F.shape, dtype=complex)
    out[0] = F
    ediag = np.exp(-1j * h * z[:, None] * D.entries[None, :])
    for n, prop in enumerate(_magnus_steps(D, zeta, z, zeta.x[0], h, n_end * substeps)):
        F = (prop @ F) * ediag[:, None, :]
        if (n + 1) % substeps == 0:
            out[(n + 1) // substeps] = F
    return out


def fundamental_solution_batch(D, zeta, z, x_end=None, substeps=1):
    """``w(x, z)`` for a batch of ``z`` via the Magnus integrator, shape ``(n, nz, m, m)``."""
    D = as_spectrum(D)
    z = np.atleast_1d(np.asarray(z, dtype=complex))
    F = transported_weyl(D, zeta, z, np.eye(D.m), x_end, substeps)
    x = zeta.x[:F.shape[0]]
    phase = np.exp(1j * x[:, None, None] * z[None, :, None] * D.entries[None, None, :])
    return F * phase[..., None, :]


# ---------------------------------------------------------------------------
# constant potential (closed form)
# ---------------------------------------------------------------------------

class ConstantPotentialWeyl:
    """Closed-form Weyl function ``T(z)`` of the constant 2x2 potential
    ``[[0, -q], [conj(q), 0]]``.

    The square root branch is chosen so that ``lambda_k(z) - i z d_k -> 0``
    for large ``|z|``; the resulting function is analytic for
    ``Im z < -M_bound`` with ``M_bound = 2|q| / |d_1 - d_2|``.
    """

    def __init__(self, D, q):
        self.D = as_spectrum(D)
        if self.D.m != 2:
            raise InvalidInput("the constant-potential Weyl function needs m = 2")
        self.q = complex(q)
        d1, d2 = self.D.entries
        self.delta = d1 - d2
        self.M_bound = 2 * abs(self.q) / abs(self.delta)

    @property
    def zeta(self):
        q = self.q
        return np.array([[0, -q], [np.conj(q), 0]], dtype=complex)

    @property
    def alpha(self):
        q = self.q
        return 1j / self.delta * np.array([[0, q], [np.conj(q), 0]], dtype=complex)

    def _root(self, z):
        z = np.asarray(z, dtype=complex)
        q2 = abs(self.q) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            u = 4 * q2 / (self.delta * z) ** 2
        on_cut = (np.abs(z.real) < 1e-12 * np.maximum(1, np.abs(z))) & \
                 (np.abs(z) <= self.M_bound * (1 + 1e-12))
        if q2 > 0 and np.any(on_cut):
            raise BranchPointOnGrid("sample lies on the branch cut of the square root")
        return self.delta * z * np.sqrt(1 + u)

    def eigenvalues(self, z):
        """Roots ``lambda_1, lambda_2`` of ``(izd1 - l)(izd2 - l) + |q|^2 = 0``."""
        z = np.asarray(z, dtype=complex)
        d1, d2 = self.D.entries
        root = self._root(z)
        lam1 = 0.5j * ((d1 + d2) * z + root)
        lam2 = 0.5j * ((d1 + d2) * z - root)
        return lam1, lam2

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        d1, d2 = self.D.entries
        q = self.q
        out = np.zeros(z.shape + (2, 2), dtype=complex)
        out[..., 0, 0] = 1
        out[..., 1, 1] = 1
        if q == 0:
            return out
        root = self._root(z)
        # lambda_k - i z d_k in cancellation-free form
        shift = 2j * abs(q) ** 2 / (root + self.delta * z)
        out[..., 0, 1] = shift / np.conj(q)      # (i z d2 - lambda_2)/conj(q)
        out[..., 1, 0] = shift / q               # (lambda_1 - i z d1)/q
        return out

    def fundamental_solution(self, x, z):
        """``w(x, z) = T exp(x Lambda) T^{-1}``."""
        x = np.asarray(x, dtype=float)
        T = self(z)
        lam1, lam2 = self.eigenvalues(z)
        ex = np.zeros(x.shape + (2, 2), dtype=complex)
        ex[..., 0, 0] = np.exp(x * lam1)
        ex[..., 1, 1] = np.exp(x * lam2)
        return T @ ex @ np.linalg.inv(T)


def weyl_constant(D, q, line):
    """Closed-form Weyl table of the constant potential on ``line``."""
    fn = ConstantPotentialWeyl(D, q)
    return WeylTable(line, fn(line.z), alpha=fn.alpha, source="closed-form", alpha_skew=True)


def tabulate(phi_fn, line, alpha=None, source="closed-form", alpha_skew=False):
    """Sample a Weyl function callable on ``line``."""
    return WeylTable(line, phi_fn(line.z), alpha=alpha, source=source, alpha_skew=alpha_skew)


# ---------------------------------------------------------------------------
# integral-equation Weyl function
# ---------------------------------------------------------------------------

def _picard_chunk(D, zeta_vals, h, z, tol, max_iter):
    d = D.entries
    m = d.size
    n = zeta_vals.shape[0]
    nz = z.size
    delta = d[:, None] - d[None, :]
    forward = delta <= 0             # lower triangle incl. diagonal for ordered D
    b = 1j * h * z[:, None, None] * delta[None]
    w_fwd = quad.filon_weights(b, h, forward=True)
    w_bwd = quad.filon_weights(b, h, forward=False)
    w = np.where(forward[None, :, :, None, None], w_fwd, w_bwd)
    e = np.where(forward[None], np.exp(b), np.exp(-b))
    fwd_flags = np.broadcast_to(forward, (nz, m, m)).reshape(-1).copy()
    w = np.ascontiguousarray(w.reshape(nz * m * m, 3, 4))
    e = np.ascontiguousarray(e.reshape(-1))

    eye = np.eye(m, dtype=complex)
    M = np.broadcast_to(eye, (nz, n, m, m)).copy()
    out = np.empty((nz * m * m, n), dtype=complex)
    for it in range(max_iter):
        g = np.matmul(zeta_vals[None], M)                          # (nz, n, m, m)
        g = np.ascontiguousarray(g.transpose(0, 2, 3, 1).reshape(nz * m * m, n))
        quad._volterra_sweep(g, w, e, fwd_flags, out)
        M_new = out.reshape(nz, m, m, n).transpose(0, 3, 1, 2) + eye
        diff = float(np.max(np.abs(M_new - M)))
        M = M_new
        if not np.isfinite(diff):
            break
        if diff <= tol:
            return M, it + 1
    raise ContractionFailure(
        f"Picard iteration did not converge after {max_iter} iterations "
        f"(last update {diff:.2e}); the L1 norm of zeta is too large or eta too small")


def marchenko_M(D, zeta, z, tol=1e-12, max_iter=500, chunk=256, keep_M=True):
    """Bounded solution ``M(x, z)`` of ``M_x = iz[D, M] - zeta M`` normalized at ``-inf``.

    The potential is extended by zero outside ``[0, L]`` and ``M`` is the fixed
    point of ``f -> I + K f`` where ``K`` integrates the strictly upper part of
    ``zeta f`` from the right and the rest (diagonal included) from the left.
    Returns ``(M, phi)`` with ``M`` of shape ``z.shape + (N+1, m, m)`` (``None``
    when ``keep_M=False``) and ``phi = M(0, z)``.
    """
    D = as_spectrum(D)
    _require_valid(zeta)
    if zeta.N < 3:
        raise InvalidInput("marchenko_M needs at least four grid nodes")
    z = np.asarray(z, dtype=complex)
    zf = z.ravel()
    m, n = D.m, zeta.x.size
    phi = np.empty((zf.size, m, m), dtype=complex)
    M_all = np.empty((zf.size, n, m, m), dtype=complex) if keep_M else None
    for s in range(0, zf.size, chunk):
        M, _ = _picard_chunk(D, zeta.values, zeta.h, zf[s:s + chunk], tol, max_iter)
        phi[s:s + chunk] = M[:, 0]
        if keep_M:
            M_all[s:s + chunk] = M
    phi = phi.reshape(z.shape + (m, m))
    if keep_M:
        M_all = M_all.reshape(z.shape + (n, m, m))
    return M_all, phi


class MarchenkoWeyl:
    """Weyl function ``phi(z) = M(0, z)`` of a compactly supported potential."""

    def __init__(self, D, zeta, tol=1e-12):
        self.D = as_spectrum(D)
        self.zeta = zeta
        self.tol = tol

    def __call__(self, z):
        _, phi = marchenko_M(self.D, self.zeta, z, tol=self.tol, keep_M=False)
        return phi


def weyl_marchenko(D, zeta, line, tol=1e-12):
    """Weyl table ``M(0, z)`` of ``zeta`` on ``line``."""
    phi = MarchenkoWeyl(D, zeta, tol)(line.z)
    alpha = compute_M1(D, zeta).M1[0]
    return WeylTable(line, phi, alpha=alpha, source="integral-equation")


def compute_M1(D, zeta):
    """First coefficient ``M_1(x)`` of ``M(x, z) = I + M_1(x)/z + O(z^-2)``."""
    D = as_spectrum(D)
    _require_valid(zeta)
    d = D.entries
    m = d.size
    delta = d[:, None] - d[None, :]
    np.fill_diagonal(delta, 1.0)
    M1 = -1j * zeta.values / delta
    idx = np.arange(m)
    M1[:, idx, idx] = 0
    inv_gap = 1.0 / (d[None, :] - d[:, None] + np.eye(m))   # (d_j - d_k)^-1
    np.fill_diagonal(inv_gap, 0.0)
    dens = np.einsum("nkj,kj->nk", np.abs(zeta.values) ** 2, inv_gap)
    if zeta.x.size >= 3:
        cum = cumulative_simpson(dens, x=zeta.x, axis=0, initial=0.0)
    else:
        cum = np.concatenate([np.zeros((1, m)), 0.5 * zeta.h * (dens[1:] + dens[:-1])])
    M1[:, idx, idx] = -1j * cum
    defect = float(np.max(np.abs(M1 + np.conj(np.swapaxes(M1, -1, -2)))))
    return MCoefficients(zeta.x.copy(), M1, defect)


# ---------------------------------------------------------------------------
# Weyl table validation
# ---------------------------------------------------------------------------

@dataclass
class WeylReport:
    alpha: np.ndarray
    sup_z_phi: float
    remainder_l2: float
    tail_fraction: float
    alpha_inv: np.ndarray
    sup_z_phi_inv: float
    remainder_inv_l2: float
    inverse_alpha_defect: float
    min_abs_det: float
    fit_rms: float
    l2_ok: bool
    passed: bool
    alpha_skew_defect: float = 0.0

    def as_dict(self):
        from .io import complex_to_json
        return {
            "alpha": complex_to_json(self.alpha),
            "sup_z_phi": self.sup_z_phi,
            "remainder_l2": self.remainder_l2,
            "tail_fraction": self.tail_fraction,
            "sup_z_phi_inv": self.sup_z_phi_inv,
            "remainder_inv_l2": self.remainder_inv_l2,
            "inverse_alpha_defect": self.inverse_alpha_defect,
            "min_abs_det": self.min_abs_det,
            "l2_ok": self.l2_ok,
            "passed": self.passed,
        }


def _remainder_stats(z, F, alpha, weights, window):
    r = z[:, None, None] * (F - alpha / z[:, None, None])
    dens = quad.frob(r) ** 2
    total = float(np.sum(weights * dens))
    tail = float(np.sum(weights[window] * dens[window]))
    return np.sqrt(total), (tail / total if total > 0 else 0.0)


def fit_alpha(table, order=4, inverse=False):
    """Fit the coefficients of ``phi - I`` (or ``phi^-1 - I``) in powers of ``1/z``."""
    z = table.z
    F = (table.inverse() if inverse else table.phi) - np.eye(table.m)
    win = quad.outer_window(table.lam)
    return quad.fit_inverse_powers(z[win], F[win], order, table.line.half_width)


def validate_weyl(table, order=4, tail_tol=0.1, det_tol=1e-12):
    """Check the asymptotic conditions on a Weyl table and fit ``alpha``.

    ``alpha`` is the least-squares leading coefficient of ``z (phi - I)`` over
    the outer third of the grid (with ``order - 1`` further inverse powers in
    the model). The square-integrability of ``z(phi - I - alpha/z)`` is judged
    by the share of its energy in the outer third (``tail_fraction``).
    """
    z = table.z
    det = np.linalg.det(table.phi)
    absdet = np.abs(det)
    if np.min(absdet) < det_tol:
        i = int(np.argmin(absdet))
        raise NotInvertible(f"phi is singular at lambda={table.lam[i]}", lam=float(table.lam[i]))
    eye = np.eye(table.m)
    phi_inv = np.linalg.inv(table.phi)
    win = quad.outer_window(table.lam)
    scale = table.line.half_width
    coef, rms = quad.fit_inverse_powers(z[win], table.phi[win] - eye, order, scale)
    coef_inv, _ = quad.fit_inverse_powers(z[win], phi_inv[win] - eye, order, scale)
    alpha = coef[0]
    alpha_inv = coef_inv[0]
    wts = table.line.weights
    F = table.phi - eye
    Finv = phi_inv - eye
    sup_phi = float(np.max(np.abs(z) * quad.frob(F)))
    sup_inv = float(np.max(np.abs(z) * quad.frob(Finv)))
    rem, tail = _remainder_stats(z, F, alpha, wts, win)
    rem_inv, tail_inv = _remainder_stats(z, Finv, -alpha, wts, win)
    # a remainder at round-off level carries no tail information
    negligible = 1e-10 * np.sqrt(table.line.half_width)
    l2_ok = ((tail <= tail_tol or rem <= negligible)
             and (tail_inv <= tail_tol or rem_inv <= negligible))
    inv_defect = float(np.max(np.abs(alpha_inv + alpha)))
    skew = float(np.max(np.abs(alpha + alpha.conj().T)))
    return WeylReport(alpha, sup_phi, rem, tail, alpha_inv, sup_inv, rem_inv, inv_defect,
                      float(np.min(absdet)), rms, l2_ok, bool(l2_ok and np.isfinite(sup_phi)),
                      skew)


# ---------------------------------------------------------------------------
# Weyl certificate
# ---------------------------------------------------------------------------

@dataclass
class CertificateReport:
    sup_norm: float
    integral_norm: float
    ceiling: float
    passed: bool
    profile: np.ndarray


def weyl_certificate(D, zeta, phi, l, z_samples, r=1.0, ceiling=1e3, substeps=4):
    """Boundedness of ``w(x, z) phi(z) exp(-i x z D)`` for ``x <= l``.

    ``phi`` is an array of matrices, one per ``z`` sample. Also reports the
    norm of ``int_0^l F(x,z)^* F(x,z) e^{-r x} dx`` with ``F`` the transported
    matrix, the truncated form of the square-integrability condition.

    Forward transport of the bounded solution amplifies rounding errors by
    ``exp(l |Im z| (max d - min d))``; a warning is issued when that exponent
    exceeds 30, since the profile is then dominated by round-off growth.
    """
    D = as_spectrum(D)
    z = np.atleast_1d(np.asarray(z_samples, dtype=complex))
    spread = float(np.ptp(D.entries))
    if l * float(np.max(np.abs(z.imag))) * spread > 30:
        warnings.warn("certificate samples are ill conditioned for forward transport",
                      DiscretizationWarning, stacklevel=2)
    F = transported_weyl(D, zeta, z, phi, x_end=l, substeps=substeps)
    norms = quad.frob(F)                                  # (n_x, nz)
    x = zeta.x[:F.shape[0]]
    gram = np.einsum("xzji,xzjk->xzik", F.conj(), F) * np.exp(-r * x)[:, None, None, None]
    integral = np.trapezoid(gram, x, axis=0)
    sup = float(np.max(norms))
    return CertificateReport(sup, float(np.max(quad.frob(integral))), ceiling,
                             sup <= ceiling, np.max(norms, axis=1))
