import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nwave_weyl._quadrature import frob
from nwave_weyl.errors import AliasingRisk, ConditioningError, InvalidInput
from nwave_weyl.inverse_solver import (alpha_hat, alpha_shifted, assemble_S, build_kernel_s,
                                       build_T, check_spacing, compute_K, compute_Pi,
                                       gamma_endpoint, identity_report, inversion_pipeline,
                                       invert_weyl, recover_zeta_at, verify_identity_AS,
                                       zeta_from_alpha)
from nwave_weyl.potentials import RandomPotential
from nwave_weyl.spectral_core import (PotentialGrid, SpectralLine, default_eta, tabulate,
                                      weyl_marchenko)

from conftest import rel_sup


def identity_table(m, eta=3.0, half_width=60.0, step=0.1):
    line = SpectralLine.uniform(eta, half_width, step)
    return tabulate(lambda z: np.broadcast_to(np.eye(m), z.shape + (m, m)).astype(complex), line,
                    alpha=np.zeros((m, m)))


@pytest.fixture(scope="module")
def random_case(D2):
    pot = RandomPotential(2, 1.0, seed=11)
    fine = PotentialGrid.from_function(pot, 1.0, 400)
    line = SpectralLine.uniform(default_eta(fine), 100.0, 0.1)
    return pot, fine, weyl_marchenko(D2, fine, line)


# ---------------------------------------------------------------------------
# Pi
# ---------------------------------------------------------------------------

def test_Pi_of_identity_table(D2):
    pi = compute_Pi(identity_table(2), 1.0, 20, D=D2)
    assert np.allclose(pi.Pi, np.eye(2))
    assert np.allclose(pi.Pi1, 0) and np.allclose(pi.Pi2, 0)


def test_Pi_derivative_at_zero(D2, e1_table, e1_result):
    expect = -1j * D2.matrix @ e1_table.alpha
    assert np.max(np.abs(e1_result.pi.Pi1[0] - expect)) < 1e-6


def test_Pi_starts_at_identity(e1_result):
    assert np.max(np.abs(e1_result.pi.Pi[0] - np.eye(2))) < 1e-6


def test_Pi_grid_refinement(D2, random_case):
    _, fine, table = random_case
    pi = compute_Pi(table, 1.0, 50, oversample=1, D=D2)
    line2 = SpectralLine.uniform(table.line.eta, 200.0, 0.05)
    table2 = weyl_marchenko(D2, fine, line2)
    pi2 = compute_Pi(table2, 1.0, 50, oversample=1, D=D2)
    assert np.max(frob(pi.Pi - pi2.Pi)) < 1e-4


def test_Pi_aliasing_guard(D2):
    table = identity_table(2, step=1.0, half_width=60.0)
    with pytest.raises(AliasingRisk):
        compute_Pi(table, 2.0, 20, D=D2)


def test_Pi_requires_spectrum():
    with pytest.raises(InvalidInput):
        compute_Pi(identity_table(2), 1.0, 10)


# ---------------------------------------------------------------------------
# kernel s and S_l
# ---------------------------------------------------------------------------

def test_kernel_vanishes_for_constant_Pi(D2):
    kernel = build_kernel_s(compute_Pi(identity_table(2), 1.0, 10, D=D2), D2)
    assert np.allclose(kernel.s, 0)


def test_kernel_diagonal_is_hermitian(e1_result):
    s = e1_result.kernel.s
    n = s.shape[0]
    for i in (0, n // 2, n - 1):
        assert np.max(np.abs(s[i, i] - s[i, i].conj().T)) < 5 * e1_result.kernel.h


def test_kernel_symmetry_defect_shrinks(e1_result, e1_result_coarse):
    assert e1_result.kernel.symmetry_defect < e1_result_coarse.kernel.symmetry_defect


def test_S_without_kernel_is_D_inverse(D2):
    kernel = build_kernel_s(compute_Pi(identity_table(2), 1.0, 10, D=D2), D2)
    S = assemble_S(kernel, D2, 1.0)
    ev = np.linalg.eigvalsh(S.hermitian)
    assert np.allclose(np.unique(np.round(ev, 12)), [0.5, 1.0])


def test_S_positive_definite(D2, e1_result):
    for l in (0.25, 0.5, 1.0):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            S = assemble_S(e1_result.kernel, D2, l)
        assert S.min_eigenvalue() > 0


def test_S_rejects_l_outside_grid(D2, e1_result):
    with pytest.raises(InvalidInput):
        assemble_S(e1_result.kernel, D2, 2.0)


def test_S_solve_roundtrip(D2, e1_result):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        S = assemble_S(e1_result.kernel, D2, 0.5)
    rng = np.random.default_rng(0)
    f = rng.standard_normal((S.x.size * 2, 2)) + 1j * rng.standard_normal((S.x.size * 2, 2))
    assert np.allclose(S.dense @ S.solve(f), f)


# ---------------------------------------------------------------------------
# operator identity AS - SA* = i Pi Pi*
# ---------------------------------------------------------------------------

def test_identity_AS_trivial_limit(D2):
    res = []
    for N in (10, 20, 40):
        pi = compute_Pi(identity_table(2), 1.0, N, D=D2)
        S = assemble_S(build_kernel_s(pi, D2), D2, 1.0)
        res.append(verify_identity_AS(S, pi, D2))
    assert res[0] > res[1] > res[2]


def test_identity_AS_constant_potential(D2, e1_result, e1_result_coarse):
    def residual(r, l):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return verify_identity_AS(assemble_S(r.kernel, D2, l), r.pi, D2)
    for l in (0.5, 1.0):
        fine = residual(e1_result, l)
        assert fine <= 0.05
        assert fine < residual(e1_result_coarse, l)


def test_identity_AS_random_potential(D2, random_case):
    _, _, table = random_case
    res = []
    for N in (50, 100):
        r = inversion_pipeline(table, D2, 1.0, N)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res.append(verify_identity_AS(assemble_S(r.kernel, D2, 1.0), r.pi, D2))
    assert res[1] < res[0]


# ---------------------------------------------------------------------------
# Gamma and zeta(l)
# ---------------------------------------------------------------------------

def test_gamma_zero_kernel(D2):
    kernel = build_kernel_s(compute_Pi(identity_table(2), 1.0, 10, D=D2), D2)
    S = assemble_S(kernel, D2, 0.5)
    assert np.allclose(gamma_endpoint(S, kernel, D2), 0)


def test_gamma_at_zero(D2, e1_result):
    S0 = assemble_S(e1_result.kernel, D2, 0.0)
    G = gamma_endpoint(S0, e1_result.kernel, D2)
    expect = -1j * e1_result.alpha_hat * np.sqrt(D2.entries)[None, :]
    assert np.max(np.abs(G - expect)) < 1e-6


def test_recover_zero_gamma(D2):
    assert np.allclose(recover_zeta_at(np.zeros((2, 2)), D2).zeta, 0)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=18, max_size=18))
def test_recover_zeta_from_alpha_hat(vals):
    D = np.array([3.0, 2.0, 1.0])
    a = (np.array(vals[:9]) + 1j * np.array(vals[9:])).reshape(3, 3)
    ah = alpha_hat(a).alpha_hat
    rec = recover_zeta_at(-1j * ah * np.sqrt(D)[None, :], D)
    expect = 1j * (D[:, None] * ah - ah * D[None, :])
    assert np.allclose(rec.zeta, expect)
    assert rec.defect < 1e-12


def test_zeta_at_interior_point(D2, e1_result, e1_truth):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        S = assemble_S(e1_result.kernel, D2, 0.5)
    z = recover_zeta_at(gamma_endpoint(S, e1_result.kernel, D2), D2).zeta
    assert rel_sup(z, e1_truth) < 0.02
    # the sweep gives the same value as the direct solve
    assert np.allclose(z, e1_result.zeta.values[100], atol=1e-8)


# ---------------------------------------------------------------------------
# full inversion
# ---------------------------------------------------------------------------

def test_invert_identity_table(D2):
    z = invert_weyl(identity_table(2), D2, 1.0, 20)
    assert np.allclose(z.values, 0)


def test_invert_constant_potential(e1_result, e1_truth):
    x = e1_result.zeta.x
    sel = (x >= 0.05) & (x <= 0.95)
    assert rel_sup(e1_result.zeta.values[sel], e1_truth) < 0.02


def test_invert_round_trip(D2, random_case):
    pot, _, table = random_case
    zeta = invert_weyl(table, D2, 1.0, 100)
    truth = pot(zeta.x)
    assert np.max(np.abs(zeta.values - truth)) < 0.05 * np.max(np.abs(truth))


def test_inverted_potential_is_admissible(e1_result):
    v = e1_result.zeta.values
    assert np.allclose(v, -np.conj(np.swapaxes(v, -1, -2)))
    assert np.allclose(np.diagonal(v, axis1=1, axis2=2), 0)
    assert e1_result.skew_defect < 1e-3


def test_endpoint_rules_agree_for_constant_potential(D2, e1_table):
    a = inversion_pipeline(e1_table, D2, 1.0, 50).zeta.values[0]
    b = inversion_pipeline(e1_table, D2, 1.0, 50, endpoint="formula").zeta.values[0]
    assert np.max(np.abs(a - b)) < 1e-4
    with pytest.raises(InvalidInput):
        inversion_pipeline(e1_table, D2, 1.0, 50, endpoint="other")


def test_zeta0_formula(D2, e1_result):
    assert np.max(np.abs(e1_result.zeta.values[0] - e1_result.zeta0_formula(D2))) < 1e-6


def test_ill_conditioned_spectrum():
    with pytest.raises(ConditioningError):
        check_spacing([1.0, 1.0 + 1e-5])


# ---------------------------------------------------------------------------
# T, K and shifted alpha
# ---------------------------------------------------------------------------

def test_T_and_K_for_trivial_data(D2):
    pi = compute_Pi(identity_table(2), 1.0, 10, D=D2)
    kernel = build_kernel_s(pi, D2)
    S = assemble_S(kernel, D2, 1.0)
    T, asym = build_T(S, kernel, D2)
    assert np.allclose(T, 0) and asym == 0
    kr = compute_K(S, pi, D2, T)
    assert np.allclose(kr.K, np.eye(2))
    assert kr.unitary_defect < 1e-12 and kr.res_51 < 1e-12 and kr.res_52 < 1e-12
    assert kr.res_315 < 1e-12


def test_T_diagonal_hermitian(D2, e1_result):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        S = assemble_S(e1_result.kernel, D2, 0.5)
    T, asym = build_T(S, e1_result.kernel, D2)
    h = e1_result.kernel.h
    assert asym < 5 * h
    assert np.max(np.abs(T[-1, -1] - T[-1, -1].conj().T)) < 5 * h


def test_identity_residuals_decay(D2, e1_result, e1_result_coarse):
    fine = identity_report(e1_result.kernel, e1_result.pi, D2, 0.5)
    coarse = identity_report(e1_result_coarse.kernel, e1_result_coarse.pi, D2, 0.5)
    h = e1_result.kernel.h
    for name in ("unitary_defect", "res_52", "res_315", "T_asymmetry"):
        assert getattr(fine, name) <= 5 * h
        assert getattr(fine, name) < getattr(coarse, name)
    assert fine.res_51 < 1e-10        # exact at the discrete level
    assert fine.min_eig > 0


def test_alpha_shifted_trivial(D2):
    a, defect = alpha_shifted(np.zeros((2, 2)), D2)
    assert np.allclose(a, 0) and defect == 0


def test_alpha_shifted_limit(D2, e1_result, e1_table):
    S0 = assemble_S(e1_result.kernel, D2, 0.0)
    T, _ = build_T(S0, e1_result.kernel, D2)
    a, _ = alpha_shifted(T[0, 0], D2)
    assert np.max(np.abs(a - e1_table.alpha)) < 1e-6


def test_zeta_from_shifted_alpha(D2, e1_result):
    rep = identity_report(e1_result.kernel, e1_result.pi, D2, 0.5)
    z = zeta_from_alpha(alpha_hat(rep.alpha_l).alpha_hat, D2)
    assert np.max(np.abs(z - e1_result.zeta.values[100])) < 2e-3


# ---------------------------------------------------------------------------
# alpha_hat
# ---------------------------------------------------------------------------

def test_alpha_hat_examples():
    assert np.allclose(alpha_hat(np.zeros((2, 2))).alpha_hat, 0)
    a = np.array([[1, 1j], [0, 1]])
    assert np.allclose(alpha_hat(a).alpha_hat, [[1, 1j], [1j, 1]])


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=18, max_size=18))
def test_alpha_hat_fixes_skew_hermitian(vals):
    a = (np.array(vals[:9]) + 1j * np.array(vals[9:])).reshape(3, 3)
    skew = a - a.conj().T
    assert np.allclose(alpha_hat(skew).alpha_hat, skew)
    ah = alpha_hat(a).alpha_hat
    assert np.allclose(np.triu(ah), np.triu(a))
    assert np.allclose(np.tril(ah, -1), np.tril(-ah.conj().T, -1))
