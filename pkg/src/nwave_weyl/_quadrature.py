"""Quadrature helpers shared by the direct and inverse solvers.

The exponentially weighted Volterra sweeps follow a Filon-type rule: the
smooth factor is replaced by its local cubic interpolant and the exponential
is integrated exactly, so accuracy does not degrade as ``|z|`` grows.
"""
import math

import numba
import numpy as np

# Lagrange node offsets (in units of h, relative to the left end of the cell)
# for the first cell, interior cells and the last cell.
_STENCILS = np.array([[0.0, 1.0, 2.0, 3.0],
                      [-1.0, 0.0, 1.0, 2.0],
                      [-2.0, -1.0, 0.0, 1.0]])
_STENCIL_BASE = (0, -1, -2)


def _lagrange_monomials(nodes):
    # column t holds the monomial coefficients of the t-th Lagrange basis polynomial
    vander = np.vander(nodes, len(nodes), increasing=True)
    return np.linalg.inv(vander)


# forward cells integrate e^{b(1-s)} P(s) ds = e^{b sigma} P(1 - sigma) d sigma
_COEF_FWD = np.stack([_lagrange_monomials(1.0 - st) for st in _STENCILS])
_COEF_BWD = np.stack([_lagrange_monomials(st) for st in _STENCILS])


def trapezoid_weights(n, h):
    """Composite trapezoid weights for ``n`` equispaced nodes with step ``h``."""
    w = np.full(n, float(h))
    if n == 1:
        return np.zeros(1)
    w[0] = w[-1] = 0.5 * h
    return w


def exp_moments(b, pmax=3):
    r"""Moments :math:`\mu_p(b) = \int_0^1 e^{b s} s^p ds` for ``p = 0..pmax``.

    Stable for ``Re b <= 0``; uses the power series for small ``|b|`` and the
    upward recurrence otherwise. Returns an array of shape ``b.shape + (pmax+1,)``.
    """
    b = np.asarray(b, dtype=complex)
    out = np.empty(b.shape + (pmax + 1,), dtype=complex)
    small = np.abs(b) < 5.0
    if np.any(small):
        bs = b[small]
        term = np.ones_like(bs)
        acc = np.zeros(bs.shape + (pmax + 1,), dtype=complex)
        for n in range(64):
            for p in range(pmax + 1):
                acc[..., p] += term / (n + p + 1)
            term = term * bs / (n + 1)
        out[small] = acc
    big = ~small
    if np.any(big):
        bb = b[big]
        eb = np.exp(bb)
        mu = (eb - 1.0) / bb
        out[big, 0] = mu
        for p in range(1, pmax + 1):
            mu = (eb - p * mu) / bb
            out[big, p] = mu
    return out


def filon_weights(b, h, forward):
    """Cell weights for one exponentially weighted cell of width ``h``.

    ``forward=True`` gives the weights of
    ``int_{y_n}^{y_n+h} exp(c (y_n + h - y)) g(y) dy`` and ``forward=False``
    those of ``int_{y_n}^{y_n+h} exp(c (y_n - y)) g(y) dy`` where ``b = c h``.
    The result has shape ``b.shape + (3, 4)``: stencil variant (first,
    interior, last cell) by tap.
    """
    if forward:
        mu = exp_moments(b)
        coef = _COEF_FWD
    else:
        mu = exp_moments(-np.asarray(b))
        coef = _COEF_BWD
    # coef[v, p, t]: coefficient of s^p in the t-th basis polynomial
    return h * np.einsum("...p,vpt->...vt", mu, coef)


@numba.njit(cache=True)
def _volterra_sweep(g, w, e, forward, out):
    # g, out: (C, n) channels; w: (C, 3, 4); e: (C,) one-cell propagators
    nch, n = g.shape
    last = n - 1
    for c in range(nch):
        if forward[c]:
            acc = 0j
            out[c, 0] = 0j
            for k in range(last):
                if k == 0:
                    v, base = 0, 0
                elif k == last - 1:
                    v, base = 2, k - 2
                else:
                    v, base = 1, k - 1
                s = (w[c, v, 0] * g[c, base] + w[c, v, 1] * g[c, base + 1]
                     + w[c, v, 2] * g[c, base + 2] + w[c, v, 3] * g[c, base + 3])
                acc = e[c] * acc - s
                out[c, k + 1] = acc
        else:
            acc = 0j
            out[c, last] = 0j
            for k in range(last - 1, -1, -1):
                if k == 0:
                    v, base = 0, 0
                elif k == last - 1:
                    v, base = 2, k - 2
                else:
                    v, base = 1, k - 1
                s = (w[c, v, 0] * g[c, base] + w[c, v, 1] * g[c, base + 1]
                     + w[c, v, 2] * g[c, base + 2] + w[c, v, 3] * g[c, base + 3])
                acc = e[c] * acc + s
                out[c, k] = acc


def inverse_power_basis(z, order, scale):
    """Columns ``(scale / z) ** k`` for ``k = 1..order``."""
    w = scale / np.asarray(z)
    return np.stack([w ** k for k in range(1, order + 1)], axis=-1)


def fit_inverse_powers(z, values, order, scale):
    """Least-squares fit ``values ~ sum_k c_k z^{-k}`` for matrix samples.

    ``values`` has shape ``(n, m, m)``. Returns ``(c, rms)`` where ``c`` has
    shape ``(order, m, m)`` and ``rms`` is the root-mean-square misfit.
    """
    basis = inverse_power_basis(z, order, scale)
    m = values.shape[-1]
    rhs = values.reshape(len(z), m * m)
    coef, *_ = np.linalg.lstsq(basis, rhs, rcond=None)
    misfit = basis @ coef - rhs
    rms = float(np.sqrt(np.mean(np.abs(misfit) ** 2)))
    powers = scale ** np.arange(1, order + 1)
    coef = coef * powers[:, None]
    return coef.reshape(order, m, m), rms


def outer_window(lam, fraction=1.0 / 3.0):
    """Mask selecting the outer ``fraction`` of a symmetric grid (by ``|lambda|``)."""
    lam = np.asarray(lam)
    half = np.max(np.abs(lam))
    return np.abs(lam) >= (1.0 - fraction) * half - 1e-12 * half


def loglog_slope(r, y):
    """Slope of the least-squares line through ``(log r, log y)``."""
    r = np.asarray(r, dtype=float)
    y = np.asarray(y, dtype=float)
    tiny = np.finfo(float).tiny
    return float(np.polyfit(np.log(r), np.log(np.maximum(y, tiny)), 1)[0])


def frob(a, axis=(-2, -1)):
    """Frobenius norm over the trailing matrix axes."""
    return np.sqrt(np.sum(np.abs(a) ** 2, axis=axis))


def interp_linear_complex(xq, x0, step, values):
    """Linear interpolation of equispaced samples along axis 0."""
    pos = (np.asarray(xq) - x0) / step
    i = np.clip(np.floor(pos).astype(int), 0, len(values) - 2)
    t = pos - i
    t = t.reshape(t.shape + (1,) * (values.ndim - 1))
    return (1 - t) * values[i] + t * values[i + 1]


def factorial(k):
    return math.factorial(k)
