"""Shifted-argument Weyl functions and the N-wave initial-boundary value problem.

A Weyl table ``phi`` determines the initial data ``[D, u(x, 0)] = Omega(D, phi)``
and the boundary data ``[D~, u(0, t)] = Omega(D~, phi)``. The table evolves as
``phi(t, z) = R(t, z) phi(z) exp(-i z D~ t)`` with ``R`` the fundamental
solution in ``t`` of the system with spectrum ``D~`` and the boundary
potential; inverting each slice with ``D`` gives ``u(x, t)``.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _quadrature as quad
from .errors import ConditioningError, InvalidInput
from .inverse_solver import check_spacing, inversion_pipeline
from .spectral_core import (WeylTable, as_spectrum, fit_alpha, transported_weyl)


def shifted_weyl(D, zeta, table, sigma, substeps=2, alpha_order=4):
    """``phi(sigma, z) = w(sigma, z) phi(z) exp(-i sigma z D)`` on the line of ``table``.

    Returns ``(table_sigma, skew_defect)`` where the new table carries the
    fitted ``alpha(sigma)`` and ``skew_defect = max |alpha + alpha^*|``.
    """
    D = as_spectrum(D)
    if sigma == 0:
        phi = table.phi.copy()
    else:
        F = transported_weyl(D, zeta, table.z, table.phi, x_end=sigma, substeps=substeps)
        phi = F[-1]
    tmp = WeylTable(table.line, phi, source="evolved")
    alpha = fit_alpha(tmp, alpha_order)[0][0]
    tmp.alpha = alpha
    tmp.alpha_skew = True
    return tmp, float(np.max(np.abs(alpha + alpha.conj().T)))


def shifted_family(D, zeta, table, substeps=2):
    """``phi(sigma_i, z)`` for every node ``sigma_i`` of ``zeta``; shape ``(n, nz, m, m)``."""
    return transported_weyl(as_spectrum(D), zeta, table.z, table.phi, substeps=substeps)


def shifted_weyl_ode_check(family, sigma, z, D, zeta_values):
    """Central-difference residual of ``phi_sigma = iz (D phi - phi D) - zeta(sigma) phi``.

    ``family`` has shape ``(n_sigma, nz, m, m)`` on the uniform ``sigma`` grid.
    Returns the max Frobenius residual over interior nodes and samples.
    """
    d = as_spectrum(D).entries
    h = sigma[1] - sigma[0]
    z = np.asarray(z)[None, :, None, None]
    P = family[1:-1]
    lhs = (family[2:] - family[:-2]) / (2 * h)
    rhs = 1j * z * (d[:, None] * P - P * d[None, :]) - zeta_values[1:-1, None] @ P
    return float(np.max(quad.frob(lhs - rhs)))


@dataclass
class EvolvedWeyl:
    t: np.ndarray
    tables: list
    boundary_zeta: object
    alphas: np.ndarray
    skew_defects: np.ndarray
    notes: dict = field(default_factory=dict)


def evolve_weyl(table, D_breve, t_grid, substeps=2, pipeline=None):
    """Time evolution of a Weyl table.

    The boundary potential ``Omega(D~, phi)`` is recovered once on the
    uniform ``t_grid``; ``R`` is then integrated in ``t`` for every sample.
    """
    Db = check_spacing(D_breve)
    t_grid = np.asarray(t_grid, dtype=float)
    if t_grid.size < 2 or not np.allclose(np.diff(t_grid), t_grid[1] - t_grid[0]) or t_grid[0] != 0:
        raise InvalidInput("t grid must be uniform and start at 0")
    kw = dict(pipeline or {})
    res = inversion_pipeline(table, Db, float(t_grid[-1]), t_grid.size - 1, **kw)
    zb = res.zeta
    F = transported_weyl(Db, zb, table.z, table.phi, substeps=substeps)
    tables, alphas, defects = [], [], []
    for k in range(t_grid.size):
        tk = WeylTable(table.line, F[k], source="evolved")
        a = fit_alpha(tk, kw.get("alpha_order", 4))[0][0]
        tk.alpha = a
        tk.alpha_skew = True
        tables.append(tk)
        alphas.append(a)
        defects.append(float(np.max(np.abs(a + a.conj().T))))
    return EvolvedWeyl(t_grid, tables, zb, np.array(alphas), np.array(defects),
                       notes={"R_equation": "integrated in t (d/dt), R(0, z) = I"})


def u_from_zeta(zeta, D):
    """Hermitian zero-diagonal ``u`` with ``[D, u] = zeta``."""
    D = as_spectrum(D)
    d = D.entries
    gap = d[:, None] - d[None, :]
    if D.min_gap < 1e-3 * float(np.max(d)):
        raise ConditioningError("spectral gap too small to solve [D, u] = zeta")
    np.fill_diagonal(gap, 1.0)
    u = np.asarray(zeta) / gap
    idx = np.arange(d.size)
    u[..., idx, idx] = 0
    return u


@dataclass
class IBVPSolution:
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray                  # (nt, nx, m, m)
    zeta: np.ndarray               # (nt, nx, m, m)
    boundary_zeta: np.ndarray      # Omega(D~, phi) on the t grid
    hermitian_defect: float
    evolution: EvolvedWeyl


def solve_ibvp(table, D, D_breve, X, T, Nx, Nt, substeps=2, pipeline=None):
    """``u(x, t)`` on ``[0, X] x [0, T]`` from ``[D, u(x, t)] = Omega(D, phi(t, .))``."""
    D = check_spacing(D)
    t = np.linspace(0.0, T, Nt + 1)
    ev = evolve_weyl(table, D_breve, t, substeps=substeps, pipeline=pipeline)
    kw = dict(pipeline or {})
    zs = []
    for tk in ev.tables:
        zs.append(inversion_pipeline(tk, D, X, Nx, **kw).zeta.values)
    zeta = np.stack(zs)
    u = u_from_zeta(zeta, D)
    herm = float(np.max(np.abs(u - np.conj(np.swapaxes(u, -1, -2)))))
    x = np.linspace(0.0, X, Nx + 1)
    return IBVPSolution(x, t, u, zeta, ev.boundary_zeta.values, herm, ev)


def commutator(d, a):
    return (d[:, None] - d[None, :]) * a


def nwave_residual(u, x, t, D, D_breve):
    """Central-difference residual of ``[D, u_t] - [D~, u_x] - [[D, u], [D~, u]]``.

    ``u`` has shape ``(nt, nx, m, m)``. Returns ``(max, mean)`` of the
    Frobenius norm over interior nodes.
    """
    d = as_spectrum(D).entries
    db = as_spectrum(D_breve).entries
    u = np.asarray(u)
    hx = x[1] - x[0]
    ht = t[1] - t[0]
    ui = u[1:-1, 1:-1]
    ut = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * ht)
    ux = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * hx)
    a = commutator(d, ui)
    b = commutator(db, ui)
    r = commutator(d, ut) - commutator(db, ux) - (a @ b - b @ a)
    nr = quad.frob(r)
    return float(np.max(nr)), float(np.mean(nr))
