"""GBDT (generalized Backlund-Darboux) transformation of the auxiliary system.

Seed data ``(A, S(0), Pi(0))`` satisfying ``A S - S A^* = i Pi Pi^*`` are
propagated along ``x`` by ``Pi_x = -i A Pi D + Pi zeta``, ``S_x = Pi D Pi^*``.
The Darboux matrix ``w_A(x, z) = I - i Pi^* S^{-1} (A - z)^{-1} Pi`` maps
solutions of the seed system to solutions of the system with potential
``zeta~ = zeta - [D, Pi^* S^{-1} Pi]``.
"""
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg as sla

from . import _quadrature as quad
from .errors import (InvalidDarbouxData, InvalidInput, PositivityLoss,
                     ResolventSingularity)
from .spectral_core import (PotentialGrid, WeylTable, as_spectrum, fit_alpha,
                            transported_weyl)


@dataclass
class GBDTTriple:
    A: np.ndarray
    S0: np.ndarray
    Pi0: np.ndarray
    x: Optional[np.ndarray] = None
    S: Optional[np.ndarray] = None
    Pi: Optional[np.ndarray] = None
    identity_residual: float = 0.0
    min_eig: float = np.nan

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.Pi0.shape[1]

    def node(self, x):
        if self.x is None:
            raise InvalidInput("triple has not been propagated")
        h = self.x[1] - self.x[0]
        i = int(round((x - self.x[0]) / h))
        if i < 0 or i >= self.x.size or abs(self.x[0] + i * h - x) > 1e-9 * max(1.0, abs(x)):
            raise InvalidInput(f"x={x} is not a trajectory node")
        return i

    def Q(self):
        """``Pi^* S^{-1} Pi`` along the trajectory."""
        sol = np.linalg.solve(self.S, self.Pi)
        return np.conj(np.swapaxes(self.Pi, -1, -2)) @ sol


def identity_defect(A, S, Pi):
    """``|| A S - S A^* - i Pi Pi^* ||`` (trailing axes)."""
    Ah = np.conj(A.T)
    R = A @ S - S @ Ah - 1j * Pi @ np.conj(np.swapaxes(Pi, -1, -2))
    return quad.frob(R)


def init_gbdt(A, S0, Pi0, tol=1e-10):
    """Validate seed data: ``S0 = S0^* > 0`` and the operator identity."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    S0 = np.atleast_2d(np.asarray(S0, dtype=complex))
    Pi0 = np.atleast_2d(np.asarray(Pi0, dtype=complex))
    n = A.shape[0]
    if A.shape != (n, n) or S0.shape != (n, n) or Pi0.shape[0] != n:
        raise InvalidDarbouxData("shapes of A, S0, Pi0 are inconsistent")
    scale = max(1.0, float(np.max(np.abs(S0))))
    if np.max(np.abs(S0 - S0.conj().T)) > tol * scale:
        raise InvalidDarbouxData("S0 is not Hermitian")
    res = float(identity_defect(A, S0, Pi0))
    if res > tol * max(scale, float(np.max(np.abs(A))) * scale):
        raise InvalidDarbouxData(f"A S0 - S0 A^* != i Pi0 Pi0^* (residual {res:.2e})")
    eig = np.linalg.eigvalsh(0.5 * (S0 + S0.conj().T))
    if eig[0] <= 0:
        raise InvalidDarbouxData(f"S0 is not positive definite (min eigenvalue {eig[0]:.3e})")
    return GBDTTriple(A, S0, Pi0, identity_residual=res, min_eig=float(eig[0]))


def seed_from_A(A, Pi0):
    """Solve ``A S - S A^* = i Pi0 Pi0^*`` for ``S0`` and return a validated triple."""
    A = np.atleast_2d(np.asarray(A, dtype=complex))
    Pi0 = np.atleast_2d(np.asarray(Pi0, dtype=complex))
    S0 = sla.solve_sylvester(A, -A.conj().T, 1j * Pi0 @ Pi0.conj().T)
    S0 = 0.5 * (S0 + S0.conj().T)
    return init_gbdt(A, S0, Pi0)


def _rhs(A, d, Pi, zeta_x):
    dPi = -1j * (A @ Pi) * d[None, :] + Pi @ zeta_x
    dS = (Pi * d[None, :]) @ Pi.conj().T
    return dPi, dS


def propagate_gbdt(triple, D, zeta, substeps=1):
    """Integrate ``(Pi, S)`` jointly over the nodes of ``zeta`` with classical RK4."""
    D = as_spectrum(D)
    if triple.m != D.m:
        raise InvalidInput("Pi0 columns must match the size of D")
    d = D.entries
    A = triple.A
    x = zeta.x
    h = zeta.h / substeps
    Pi, S = triple.Pi0.copy(), triple.S0.copy()
    Pis = np.empty((x.size,) + Pi.shape, dtype=complex)
    Ss = np.empty((x.size,) + S.shape, dtype=complex)
    Pis[0], Ss[0] = Pi, S
    for i in range(x.size - 1):
        for k in range(substeps):
            x0 = x[i] + k * h
            z0, zm, z1 = (zeta(np.array(v)) for v in (x0, x0 + 0.5 * h, x0 + h))
            k1p, k1s = _rhs(A, d, Pi, z0)
            k2p, k2s = _rhs(A, d, Pi + 0.5 * h * k1p, zm)
            k3p, k3s = _rhs(A, d, Pi + 0.5 * h * k2p, zm)
            k4p, k4s = _rhs(A, d, Pi + h * k3p, z1)
            Pi = Pi + (h / 6) * (k1p + 2 * k2p + 2 * k3p + k4p)
            S = S + (h / 6) * (k1s + 2 * k2s + 2 * k3s + k4s)
        Pis[i + 1], Ss[i + 1] = Pi, S
    Ss = 0.5 * (Ss + np.conj(np.swapaxes(Ss, -1, -2)))
    min_eig = float(np.min(np.linalg.eigvalsh(Ss)[:, 0]))
    if min_eig <= 0:
        raise PositivityLoss(f"S(x) lost positivity (min eigenvalue {min_eig:.3e})")
    res = float(np.max(identity_defect(A, Ss, Pis)))
    return replace(triple, x=x.copy(), S=Ss, Pi=Pis, identity_residual=res, min_eig=min_eig)


def darboux_matrix(triple, x, z, tol=1e-8):
    """``w_A(x, z)`` at a trajectory node for scalar or array ``z``."""
    i = triple.node(x)
    return _darboux(triple.A, triple.S[i], triple.Pi[i], z, tol)


def _darboux(A, S, Pi, z, tol=1e-8):
    z = np.asarray(z, dtype=complex)
    ev = np.linalg.eigvals(A)
    if np.min(np.abs(z.reshape(-1, 1) - ev[None, :])) < tol:
        raise ResolventSingularity("z lies on the spectrum of A")
    n, m = Pi.shape
    eye_n = np.eye(n)
    res = np.linalg.solve(A - z[..., None, None] * eye_n, np.broadcast_to(Pi, z.shape + (n, m)))
    left = np.linalg.solve(S, res)
    return np.eye(m) - 1j * (Pi.conj().T @ left)


def transformed_potential(triple, D, zeta):
    """``zeta~ = zeta - (D Q - Q D)`` with ``Q = Pi^* S^{-1} Pi`` on every node.

    Returns the potential and its skew/diagonal defect.
    """
    d = as_spectrum(D).entries
    Q = triple.Q()
    zt = zeta.values - (d[:, None] * Q - Q * d[None, :])
    herm = float(np.max(np.abs(zt + np.conj(np.swapaxes(zt, -1, -2)))))
    diag = float(np.max(np.abs(np.diagonal(zt, axis1=-2, axis2=-1))))
    return PotentialGrid(triple.x.copy(), zt), max(herm, diag)


def transformed_alpha(triple, alpha_sigma, sigma=0.0):
    """``alpha~(sigma) = alpha(sigma) + i Pi^* S^{-1} Pi`` at ``sigma``."""
    i = triple.node(sigma)
    Q = triple.Pi[i].conj().T @ np.linalg.solve(triple.S[i], triple.Pi[i])
    return np.asarray(alpha_sigma) + 1j * Q


def verify_darboux_ode(triple, D, zeta, z):
    """Max central-difference residual of ``w_A' = G~ w_A - w_A G`` over interior nodes."""
    D = as_spectrum(D)
    d = D.entries
    x = triple.x
    h = x[1] - x[0]
    W = np.stack([_darboux(triple.A, triple.S[i], triple.Pi[i], z) for i in range(x.size)])
    zt, _ = transformed_potential(triple, D, zeta)
    izD = 1j * z * np.diag(d)
    Gt = izD - zt.values
    G = izD - zeta.values
    lhs = (W[2:] - W[:-2]) / (2 * h)
    rhs = Gt[1:-1] @ W[1:-1] - W[1:-1] @ G[1:-1]
    return float(np.max(quad.frob(lhs - rhs)))


def transformed_weyl(triple, D, zeta, table, sigma=0.0, substeps=2, alpha_order=4):
    """``phi~(sigma, z) = w_A(sigma, z) w(sigma, z) phi(z) exp(-i sigma z D)`` on the line of ``table``.

    At ``sigma = 0`` this is ``w_A(0, z) phi(z)``. ``alpha~`` is ``alpha(sigma)``
    plus ``i Pi^* S^{-1} Pi``, with ``alpha(sigma)`` taken from the table at
    ``sigma = 0`` and fitted from the shifted seed table otherwise.
    """
    D = as_spectrum(D)
    z = table.z
    i = triple.node(sigma)
    if i == 0:
        shifted = table.phi
        alpha = table.alpha if table.alpha is not None else fit_alpha(table, alpha_order)[0][0]
    else:
        F = transported_weyl(D, zeta, z, table.phi, x_end=sigma, substeps=substeps)
        shifted = F[-1]
        tmp = WeylTable(table.line, shifted, source="evolved")
        alpha = fit_alpha(tmp, alpha_order)[0][0]
    wa = _darboux(triple.A, triple.S[i], triple.Pi[i], z)
    phi_t = wa @ shifted
    at = transformed_alpha(triple, alpha, sigma)
    return WeylTable(table.line, phi_t, alpha=at, source="transformed", alpha_skew=True)


# ---------------------------------------------------------------------------
# closed-form example with zero seed potential and n = 2
# ---------------------------------------------------------------------------

def exp_jordan(a, t, jordan):
    """``exp(-i t A)`` for ``A = diag(a, a)`` or the Jordan block ``[[a, 1], [0, a]]``."""
    t = np.asarray(t, dtype=float)
    e = np.exp(-1j * t * a)
    out = np.zeros(t.shape + (2, 2), dtype=complex)
    out[..., 0, 0] = e
    out[..., 1, 1] = e
    if jordan:
        out[..., 0, 1] = -1j * t * e
    return out


def example_matrix(a, jordan):
    return np.array([[a, 1.0 if jordan else 0.0], [0.0, a]], dtype=complex)


def example_pi(a, f, D, x, jordan=False):
    """``Pi(x) = [exp(-i x d_1 A) f_1, ..., exp(-i x d_m A) f_m]`` (zero seed potential)."""
    d = as_spectrum(D).entries
    f = np.asarray(f, dtype=complex)
    x = np.asarray(x, dtype=float)
    cols = [exp_jordan(a, x * dk, jordan) @ f[:, k] for k, dk in enumerate(d)]
    return np.stack(cols, axis=-1)


def example_S(a, Pi, jordan=False):
    """``S`` from the operator identity, in closed form for both example matrices."""
    Q = Pi @ np.conj(np.swapaxes(Pi, -1, -2))
    g = a - np.conj(a)
    if not jordan:
        return 1j * Q / g
    s22 = 1j * Q[..., 1, 1] / g
    s12 = (1j * Q[..., 0, 1] - s22) / g
    s21 = np.conj(s12)
    s11 = (1j * Q[..., 0, 0] + s12 - s21) / g
    S = np.empty(Q.shape, dtype=complex)
    S[..., 0, 0], S[..., 0, 1], S[..., 1, 0], S[..., 1, 1] = s11, s12, s21, s22
    return S


@dataclass
class ClosedFormExample:
    """Closed forms of the two-dimensional example for a zero seed potential."""

    a: complex
    f: np.ndarray
    D: object
    jordan: bool = False

    def __post_init__(self):
        self.D = as_spectrum(self.D)
        self.f = np.asarray(self.f, dtype=complex)
        if self.f.shape != (2, self.D.m):
            raise InvalidInput("f must have shape (2, m)")
        if np.imag(self.a) <= 0:
            raise InvalidDarbouxData("Im a must be positive for S > 0")

    @property
    def A(self):
        return example_matrix(self.a, self.jordan)

    def Pi(self, x):
        return example_pi(self.a, self.f, self.D, x, self.jordan)

    def S(self, x):
        return example_S(self.a, self.Pi(x), self.jordan)

    def triple(self):
        return init_gbdt(self.A, self.S(0.0), self.Pi(0.0))

    def zeta(self, x):
        """Transformed potential ``-(D Q - Q D)``."""
        d = self.D.entries
        P = self.Pi(x)
        Q = np.conj(np.swapaxes(P, -1, -2)) @ np.linalg.solve(self.S(x), P)
        return -(d[:, None] * Q - Q * d[None, :])

    def darboux(self, x, z):
        return _darboux(self.A, self.S(x), self.Pi(x), z)
