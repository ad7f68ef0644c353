"""Weyl function to potential: Fourier inversion for ``Pi``, the kernel ``s``,
the Nystrom operator ``S_l`` and the endpoint recovery of ``zeta(l)``.

The operator ``S_l f = D^{-1} f + int_0^l s(x, u) f(u) du`` is discretized by
the trapezoid rule on the nodes of ``[0, l]``. Grid functions are stored
node-major, so index ``i*m + k`` holds component ``k`` at node ``x_i``.
"""
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numba
import numpy as np
import scipy.linalg as sla

from . import _quadrature as quad
from .errors import (AliasingRisk, ConditioningError, DiscretizationWarning,
                     InvalidInput, ReconstructionWarning, SingularOperator)
from .spectral_core import PotentialGrid, as_spectrum, skew_project, validate_weyl


# ---------------------------------------------------------------------------
# types
# ---------------------------------------------------------------------------

@dataclass
class PiGrid:
    """``Pi`` and its first two derivatives on a fine uniform grid of ``[0, L]``."""

    x: np.ndarray
    Pi: np.ndarray
    Pi1: np.ndarray
    Pi2: np.ndarray
    oversample: int = 1
    tail: Optional[np.ndarray] = None

    @property
    def step(self):
        return float(self.x[1] - self.x[0])

    @property
    def m(self):
        return self.Pi.shape[-1]

    def coarse(self):
        """``(x, Pi, Pi1, Pi2)`` on the coarse grid."""
        s = slice(None, None, self.oversample)
        return self.x[s], self.Pi[s], self.Pi1[s], self.Pi2[s]

    def derivative_at(self, xq):
        return quad.interp_linear_complex(xq, 0.0, self.step, self.Pi1)


@dataclass
class KernelGrid:
    """Kernel ``s(x_i, x_j)`` on the square of coarse nodes."""

    x: np.ndarray
    s: np.ndarray
    pi: PiGrid
    D: object
    symmetry_defect: float = 0.0

    @property
    def h(self):
        return float(self.x[1] - self.x[0])

    @property
    def m(self):
        return self.s.shape[-1]

    def theta(self, x, u):
        """``theta(x, u) = Pi'(x) Pi'(u)^* D^{-1}``."""
        a = self.pi.derivative_at(np.asarray(x, dtype=float))
        b = self.pi.derivative_at(np.asarray(u, dtype=float))
        return a @ np.conj(np.swapaxes(b, -1, -2)) / self.D.entries

    def block(self, n):
        """Kernel on nodes ``0..n`` as a dense ``(n+1)m`` square matrix."""
        m = self.m
        k = self.s[:n + 1, :n + 1].transpose(0, 2, 1, 3).reshape((n + 1) * m, (n + 1) * m)
        return k


@dataclass
class DiscreteOperatorS:
    """Trapezoid Nystrom discretization of ``S_l``.

    ``kernel`` is the Hermitian-symmetrized kernel block and ``weights`` the
    trapezoid weights; the nodal matrix is ``D^{-1} + kernel @ diag(weights)``
    and ``hermitian`` is its symmetric form ``W^{1/2} S W^{-1/2}``.
    """

    x: np.ndarray
    D: object
    kernel: np.ndarray
    weights: np.ndarray
    symmetrization_defect: float = 0.0
    _chol: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def m(self):
        return self.D.m

    @property
    def l(self):
        return float(self.x[-1])

    @property
    def h(self):
        return float(self.x[1] - self.x[0]) if self.x.size > 1 else 0.0

    def _wvec(self):
        return np.repeat(self.weights, self.m)

    def _dinv(self):
        return np.tile(1.0 / self.D.entries, self.x.size)

    @property
    def dense(self):
        return np.diag(self._dinv()).astype(complex) + self.kernel * self._wvec()[None, :]

    @property
    def hermitian(self):
        r = np.sqrt(self._wvec())
        return np.diag(self._dinv()).astype(complex) + r[:, None] * self.kernel * r[None, :]

    def min_eigenvalue(self):
        return float(sla.eigvalsh(self.hermitian)[0])

    def cholesky(self):
        if self._chol is None:
            try:
                self._chol = sla.cholesky(self.hermitian, lower=True)
            except np.linalg.LinAlgError as exc:
                raise SingularOperator("discretized S is not positive definite") from exc
        return self._chol

    def solve(self, rhs):
        """Solve ``S g = rhs`` for nodal ``rhs`` of shape ``(n*m, ...)``."""
        if np.any(self.weights <= 0):
            raise SingularOperator("degenerate interval: S_l needs l > 0")
        r = np.sqrt(self._wvec())
        L = self.cholesky()
        shape = rhs.shape
        b = (r[:, None] * rhs.reshape(shape[0], -1))
        y = sla.cho_solve((L, True), b)
        return (y / r[:, None]).reshape(shape)


@dataclass(frozen=True)
class AlphaPair:
    alpha: np.ndarray
    alpha_hat: np.ndarray


def alpha_hat(alpha):
    """Upper triangle of ``alpha`` completed by ``-conj`` reflection below the diagonal."""
    a = np.asarray(alpha, dtype=complex)
    upper = np.triu(np.ones(a.shape, dtype=bool))
    ah = np.where(upper, a, -np.conj(a.T))
    return AlphaPair(a, ah)


def check_spacing(D, rel=1e-3):
    D = as_spectrum(D)
    if D.min_gap < rel * float(np.max(D.entries)):
        raise ConditioningError(
            f"min |d_k - d_j| = {D.min_gap:.3e} below {rel} * max d; recovery is ill conditioned")
    return D


# ---------------------------------------------------------------------------
# Pi by contour Fourier inversion
# ---------------------------------------------------------------------------

def compute_Pi(table, L, N, oversample=4, order=6, D=None, chunk=64):
    """``Pi(x) = (1/2 pi i) int z^{-1} exp(i x z D) phi(z)^{-1} dlambda`` for ``x in [0, L]``.

    ``phi^{-1} - I`` is split into a fitted tail ``sum_k c_k z^{-k}``, whose
    transform is exact (``(ixD)^k / k!`` per power), and a remainder summed
    with trapezoid weights along the line.
    """
    if D is None:
        raise InvalidInput("compute_Pi needs the spectrum D")
    D = as_spectrum(D)
    d = D.entries
    line = table.line
    if L * line.step * float(np.max(d)) > np.pi:
        raise AliasingRisk(
            f"lambda step {line.step} too coarse for x up to {L} "
            f"(need step <= {np.pi / (L * np.max(d)):.4g})")
    m = D.m
    z = line.z
    eye = np.eye(m)
    F = table.inverse() - eye
    win = quad.outer_window(line.lam)
    c, _ = quad.fit_inverse_powers(z[win], F[win], order, line.half_width)
    rho = F - np.einsum("zk,kij->zij", quad.inverse_power_basis(z, order, 1.0), c)

    nf = N * oversample
    x = np.linspace(0.0, L, nf + 1)
    Pi = np.zeros((nf + 1, m, m), dtype=complex)
    Pi1 = np.zeros_like(Pi)
    Pi2 = np.zeros_like(Pi)

    # analytic part of the fitted tail
    for k in range(1, order + 1):
        ck = c[k - 1]
        Pi += ((1j * x[:, None] * d) ** k / quad.factorial(k))[..., None] * ck
        Pi1 += (k * (1j * d) ** k * x[:, None] ** (k - 1) / quad.factorial(k))[..., None] * ck
        if k >= 2:
            Pi2 += (k * (k - 1) * (1j * d) ** k * x[:, None] ** (k - 2)
                    / quad.factorial(k))[..., None] * ck
    Pi += eye

    # remainder by direct summation along the line
    tw = line.weights / (2j * np.pi)
    for s in range(0, nf + 1, chunk):
        xs = x[s:s + chunk]
        for r in range(m):
            e = np.exp(1j * xs[:, None] * z[None, :] * d[r]) * tw
            Pi[s:s + chunk, r] += (e / z) @ rho[:, r, :]
            Pi1[s:s + chunk, r] += 1j * d[r] * (e @ rho[:, r, :])
            Pi2[s:s + chunk, r] += (1j * d[r]) ** 2 * ((e * z) @ rho[:, r, :])
    return PiGrid(x, Pi, Pi1, Pi2, oversample, c)


# ---------------------------------------------------------------------------
# kernel s
# ---------------------------------------------------------------------------

@numba.njit(cache=True, inline="always")
def _lerp(p1, step, xq, row, col):
    # linear interpolation of p1[:, row, col] at xq
    nf = p1.shape[0]
    pos = xq / step
    i = int(np.floor(pos))
    if i < 0:
        i = 0
    if i > nf - 2:
        i = nf - 2
    t = pos - i
    return (1.0 - t) * p1[i, row, col] + t * p1[i + 1, row, col]


@numba.njit(cache=True, inline="always")
def _theta_sum(p1, step, xa, xb, k, j):
    f = 0j
    for q in range(p1.shape[2]):
        f += _lerp(p1, step, xa, k, q) * np.conj(_lerp(p1, step, xb, j, q))
    return f


@numba.njit(cache=True)
def _kernel_s(p1, step, d, xs, out):
    n = xs.size
    m = d.size
    h = xs[1] - xs[0]
    for a in range(n):
        x = xs[a]
        for b in range(n):
            u = xs[b]
            for k in range(m):
                for j in range(m):
                    r = d[k] / d[j]
                    tmax = min(x, u / r)
                    nfull = int(np.floor(tmax / h + 1e-9))
                    # trapezoid over tau = 0, h, ..., nfull*h plus a partial last cell
                    acc = 0j
                    f = _theta_sum(p1, step, x, u, k, j)
                    prev = f
                    if nfull > 0:
                        acc = 0.5 * h * f
                        for i in range(1, nfull + 1):
                            tau = i * h
                            f = _theta_sum(p1, step, x - tau, u - r * tau, k, j)
                            acc += h * f
                        acc -= 0.5 * h * f
                        prev = f
                    rest = tmax - nfull * h
                    if rest > 1e-12 * h:
                        f = _theta_sum(p1, step, x - tmax, u - r * tmax, k, j)
                        acc += 0.5 * rest * (prev + f)
                    acc /= d[j]
                    if u <= r * x:
                        acc += _lerp(p1, step, x - u / r, k, j) / d[k]
                    else:
                        acc += np.conj(_lerp(p1, step, u - r * x, j, k)) / d[j]
                    out[a, b, k, j] = acc


def build_kernel_s(pi, D):
    """Tabulate ``s(x_i, x_j)`` on the coarse grid of ``pi``."""
    D = as_spectrum(D)
    xs, *_ = pi.coarse()
    n, m = xs.size, D.m
    out = np.empty((n, n, m, m), dtype=complex)
    _kernel_s(np.ascontiguousarray(pi.Pi1), pi.step, D.entries, xs, out)
    herm = np.conj(out.transpose(1, 0, 3, 2))
    scale = max(float(np.max(np.abs(out))), 1e-300)
    defect = float(np.max(np.abs(out - herm))) / scale
    return KernelGrid(xs, out, pi, D, defect)


def assemble_S(kernel, D, l, warn_tol=1e-6):
    """``S_l`` on the nodes of ``[0, l]`` with the kernel Hermitian-symmetrized."""
    D = as_spectrum(D)
    n = int(round(l / kernel.h))
    if n > kernel.x.size - 1 or l < 0:
        raise InvalidInput(f"l={l} outside the kernel grid [0, {kernel.x[-1]}]")
    K = kernel.block(n)
    defect = float(np.max(np.abs(K - K.conj().T))) / 2 if K.size else 0.0
    if defect > warn_tol:
        warnings.warn(f"kernel symmetrization defect {defect:.2e}", DiscretizationWarning,
                      stacklevel=2)
    Ksym = 0.5 * (K + K.conj().T)
    w = quad.trapezoid_weights(n + 1, kernel.h)
    return DiscreteOperatorS(kernel.x[:n + 1].copy(), D, Ksym, w, defect)


def _pi_column(pi, n):
    _, P, _, _ = pi.coarse()
    return P[:n + 1].reshape((n + 1) * P.shape[-1], P.shape[-1])


def verify_identity_AS(S, pi, D):
    """Normalized operator-norm residual of ``AS - SA^* - i Pi Pi^*`` on the grid."""
    D = as_spectrum(D)
    n1 = S.x.size
    m = D.m
    h = S.h
    C = np.zeros((n1, n1))
    for i in range(1, n1):
        C[i, :i + 1] = quad.trapezoid_weights(i + 1, h)
    A = np.kron(C, np.diag(1j * D.entries))
    wv = S._wvec()
    r = np.sqrt(wv)
    Sm = S.dense
    Astar = (A.conj().T * wv[None, :]) / wv[:, None]
    P = _pi_column(pi, n1 - 1)
    PP = (P @ P.conj().T) * wv[None, :]
    R = A @ Sm - Sm @ Astar - 1j * PP
    Rs = r[:, None] * R / r[None, :]
    Ss = r[:, None] * Sm / r[None, :]
    return float(np.linalg.norm(Rs, 2) / np.linalg.norm(Ss, 2))


# ---------------------------------------------------------------------------
# endpoint recovery
# ---------------------------------------------------------------------------

def gamma_endpoint(S, kernel, D):
    """``Gamma(l, l) = D^{-1} (S_l^{-1} s(., l))(l) D^{1/2}``."""
    D = as_spectrum(D)
    n = S.x.size - 1
    d = D.entries
    if n == 0:
        g = d[:, None] * kernel.s[0, 0]
    else:
        rhs = kernel.s[:n + 1, n].reshape((n + 1) * D.m, D.m)
        g = S.solve(rhs)[-D.m:]
    return (g / d[:, None]) * np.sqrt(d)[None, :]


@dataclass
class ZetaRecovery:
    zeta: np.ndarray
    defect: float


def recover_zeta_at(Gamma_ll, D, tol=1e-2):
    """``zeta(l) = (Gamma - D Gamma D^{-1}) D^{1/2}`` projected to skew-Hermitian zero-diagonal form."""
    D = as_spectrum(D)
    d = D.entries
    G = np.asarray(Gamma_ll, dtype=complex)
    raw = (G - d[:, None] * G / d[None, :]) * np.sqrt(d)[None, :]
    proj = skew_project(raw)
    defect = float(np.max(np.abs(raw - proj), initial=0.0))
    scale = max(float(np.max(np.abs(proj))), 1.0)
    if defect > tol * scale:
        warnings.warn(f"recovered zeta deviates from skew symmetry by {defect:.2e}",
                      ReconstructionWarning, stacklevel=2)
    return ZetaRecovery(proj, defect)


def _sweep(kernel, D):
    """Endpoint ``g_n = (S_{x_n}^{-1} s(., x_n))(x_n)`` for every node, one Cholesky factor."""
    m = D.m
    d = D.entries
    h = kernel.h
    n1 = kernel.x.size
    K = kernel.block(n1 - 1)
    K = 0.5 * (K + K.conj().T)
    c = np.repeat(quad.trapezoid_weights(n1, h), m)
    c[-m:] = h
    rc = np.sqrt(c)
    H = np.diag(np.tile(1.0 / d, n1)).astype(complex) + rc[:, None] * K * rc[None, :]
    try:
        Lb = sla.cholesky(H, lower=True)
    except np.linalg.LinAlgError as exc:
        raise SingularOperator("discretized S is not positive definite") from exc
    Z = sla.solve_triangular(Lb, rc[:, None] * K, lower=True)
    half = np.sqrt(0.5 * h)
    out = np.empty((n1, m, m), dtype=complex)
    out[0] = d[:, None] * kernel.s[0, 0]
    min_pivot = np.inf
    for n in range(1, n1):
        rows = slice(n * m, (n + 1) * m)
        Lrow = Lb[rows, :n * m] / np.sqrt(2.0)
        Hnn = np.diag(1.0 / d) + 0.5 * h * K[rows, rows]
        Snn = Hnn - Lrow @ Lrow.conj().T
        Snn = 0.5 * (Snn + Snn.conj().T)
        try:
            Lnn = sla.cholesky(Snn, lower=True)
        except np.linalg.LinAlgError as exc:
            raise SingularOperator(f"S_l lost positivity at l={kernel.x[n]}") from exc
        min_pivot = min(min_pivot, float(np.min(np.diag(Lnn).real)))
        bn = half * kernel.s[n, n]
        yp = sla.solve_triangular(Lnn, bn - Lrow @ Z[:n * m, rows], lower=True)
        y = sla.solve_triangular(Lnn.conj().T, yp, lower=False)
        out[n] = y / half
    return out, min_pivot


@dataclass
class InversionResult:
    zeta: PotentialGrid
    pi: PiGrid
    kernel: KernelGrid
    gamma: np.ndarray
    alpha: np.ndarray
    alpha_hat: np.ndarray
    weyl_report: object
    skew_defect: float
    diagnostics: dict = field(default_factory=dict)

    def zeta0_formula(self, D):
        """``i (D alpha_hat - alpha_hat D)`` from the fitted ``alpha``."""
        d = as_spectrum(D).entries
        ah = self.alpha_hat
        return 1j * (d[:, None] * ah - ah * d[None, :])


def inversion_pipeline(table, D, L, N, oversample=4, order=6, alpha_order=4,
                       check_weyl=True, endpoint="extrapolate"):
    """Run the full pipeline and keep the intermediate objects.

    ``endpoint`` selects the value at ``x = 0``: ``"extrapolate"`` (cubic
    extrapolation of the sweep) or ``"formula"`` (``D s(0, 0)``). The formula
    needs ``Pi'`` exactly at the jump of ``Pi`` and converges only with the
    line half-width, so the default follows the interior nodes instead.
    """
    if endpoint not in ("extrapolate", "formula"):
        raise InvalidInput(f"unknown endpoint rule '{endpoint}'")
    D = check_spacing(D)
    if table.m != D.m:
        raise InvalidInput("table size does not match D")
    report = validate_weyl(table, order=alpha_order) if check_weyl else None
    if report is not None and not report.passed:
        warnings.warn("Weyl table fails the square-integrability surrogate",
                      ReconstructionWarning, stacklevel=2)
    pi = compute_Pi(table, L, N, oversample=oversample, order=order, D=D)
    kernel = build_kernel_s(pi, D)
    g, _ = _sweep(kernel, D)
    if endpoint == "extrapolate" and g.shape[0] >= 4:
        g[0] = 3 * g[1] - 3 * g[2] + g[3]
    d = D.entries
    gamma = (g / d[:, None]) * np.sqrt(d)
    raw = (gamma - d[:, None] * gamma / d) * np.sqrt(d)
    zeta = skew_project(raw)
    defect = float(np.max(np.abs(raw - zeta)))
    alpha = report.alpha if report is not None else -pi.tail[0]
    ah = alpha_hat(alpha).alpha_hat
    return InversionResult(PotentialGrid(kernel.x, zeta), pi, kernel, gamma, alpha, ah,
                           report, defect)


def invert_weyl(table, D, L, N, **kw):
    """Recover the potential ``zeta`` on ``[0, L]`` (``N`` steps) from a Weyl table."""
    return inversion_pipeline(table, D, L, N, **kw).zeta


# ---------------------------------------------------------------------------
# T-kernel, K-function and shifted alpha
# ---------------------------------------------------------------------------

def build_T(S, kernel, D):
    """``T(x, u) = -D s D + D int (S^{-1} s(., x))^* s(., u) dv D`` on the nodes of ``S``.

    Returns ``(T, asymmetry)`` with ``T`` of shape ``(n, n, m, m)`` and the max
    of ``|T(x,u) - T(u,x)^*|``.
    """
    D = as_spectrum(D)
    m = D.m
    n1 = S.x.size
    K = kernel.block(n1 - 1)          # raw kernel, so the symmetry check is not automatic
    dvec = np.tile(D.entries, n1)
    T = -dvec[:, None] * K * dvec[None, :]
    if n1 > 1:
        G = S.solve(K)
        wv = S._wvec()
        T += dvec[:, None] * (G.conj().T @ (wv[:, None] * K)) * dvec[None, :]
    T4 = T.reshape(n1, m, n1, m).transpose(0, 2, 1, 3)
    asym = float(np.max(np.abs(T4 - np.conj(T4.transpose(1, 0, 3, 2)))))
    return T4, asym


@dataclass
class KReport:
    K: np.ndarray
    unitary_defect: float
    res_51: float
    res_52: float
    res_315: Optional[float] = None


def compute_K(S, pi, D, T=None):
    """``K(x) = D^{-1} (S^{-1} Pi)(x)`` with the associated endpoint identities."""
    D = as_spectrum(D)
    m = D.m
    d = D.entries
    n1 = S.x.size
    h = S.h
    P = _pi_column(pi, n1 - 1)
    G = S.solve(P)
    K = G.reshape(n1, m, m) / d[:, None]
    eye = np.eye(m)
    Kl = K[-1]
    unit = float(np.linalg.norm(Kl @ Kl.conj().T - eye, 2))
    _, _, P1, P2 = pi.coarse()
    P1 = P1[:n1]
    P2 = P2[:n1]
    w = S.weights
    KhP1 = np.einsum("n,nji,njk->ik", w, K.conj(), P1)            # int K^* Pi'
    res51 = float(np.linalg.norm(eye - KhP1 - K[0].conj().T, 2))
    KhP2 = np.einsum("n,nji,njk->ik", w, K.conj(), P2 / d[:, None])
    dK0 = (-3 * K[0] + 4 * K[1] - K[2]) / (2 * h)
    r52 = KhP2 - dK0.conj().T / d[None, :] + (eye - KhP1) @ (P1[0] / d[:, None])
    res52 = float(np.linalg.norm(r52, 2))
    res315 = None
    if T is not None:
        res315 = identity_315_residual(T, K, D, h)
    return KReport(K, unit, res51, res52, res315)


def identity_315_residual(T, K, D, h):
    """Max over the grid of ``I + D^{-1} int_u^l T(x,v) dv + int_x^l T(v,u) dv D^{-1} - K(x)K(u)^*``."""
    d = as_spectrum(D).entries
    m = d.size
    n1 = T.shape[0]
    # tail[i, j] = int_{x_j}^{l} T(x_i, v) dv (trapezoid)
    seg = 0.5 * h * (T[:, 1:] + T[:, :-1])
    tail_v = np.concatenate([np.cumsum(seg[:, ::-1], axis=1)[:, ::-1],
                             np.zeros((n1, 1, m, m))], axis=1)
    segx = 0.5 * h * (T[1:] + T[:-1])
    tail_x = np.concatenate([np.cumsum(segx[::-1], axis=0)[::-1],
                             np.zeros((1, n1, m, m))], axis=0)
    lhs = np.eye(m) + tail_v / d[:, None] + tail_x / d[None, :]
    rhs = K[:, None] @ np.conj(np.swapaxes(K, -1, -2))[None, :]
    return float(np.max(quad.frob(lhs - rhs)))


def alpha_shifted(T_ll, D):
    """``alpha(l) = -i D^{-1} T(l,l) D^{-1}``, with its skew-Hermitian defect."""
    d = as_spectrum(D).entries
    a = -1j * np.asarray(T_ll) / d[:, None] / d[None, :]
    return a, float(np.max(np.abs(a + a.conj().T)))


def zeta_from_alpha(alpha, D):
    d = as_spectrum(D).entries
    return 1j * (d[:, None] * alpha - alpha * d[None, :])


@dataclass
class IdentityReport:
    l: float
    min_eig: float
    as_residual: float
    unitary_defect: float
    res_51: float
    res_52: float
    res_315: float
    T_asymmetry: float
    alpha_l: np.ndarray
    alpha_l_skew_defect: float

    def as_dict(self):
        out = {k: v for k, v in self.__dict__.items() if k != "alpha_l"}
        out["alpha_l"] = [[[complex(v).real, complex(v).imag] for v in row]
                          for row in self.alpha_l]
        return out


def identity_report(kernel, pi, D, l):
    """All operator-identity diagnostics for ``S_l``."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DiscretizationWarning)
        S = assemble_S(kernel, D, l)
    T, asym = build_T(S, kernel, D)
    kr = compute_K(S, pi, D, T)
    a, adef = alpha_shifted(T[-1, -1], D)
    return IdentityReport(S.l, S.min_eigenvalue(), verify_identity_AS(S, pi, D),
                          kr.unitary_defect, kr.res_51, kr.res_52, kr.res_315, asym, a, adef)
