import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from nwave_weyl._quadrature import frob
from nwave_weyl.errors import (BranchPointOnGrid, DiscretizationWarning, ContractionFailure, InvalidInput,
                               NotInvertible)
from nwave_weyl.potentials import RandomPotential, bump_potential, constant_potential
from nwave_weyl.spectral_core import (ConstantPotentialWeyl, DiagonalSpectrum, PotentialGrid,
                                      SpectralLine, WeylTable, compute_M1, default_eta,
                                      fit_alpha, fundamental_solution,
                                      fundamental_solution_batch, marchenko_M, skew_project,
                                      tabulate, transported_weyl, validate_potential,
                                      validate_weyl, weyl_certificate, weyl_constant,
                                      weyl_marchenko)


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("bad", [[1.0], [1.0, 1.0], [2.0, -1.0], [0.0, 1.0], [np.nan, 1.0]])
def test_spectrum_rejects_invalid(bad):
    with pytest.raises(InvalidInput):
        DiagonalSpectrum(bad)


def test_spectrum_properties():
    D = DiagonalSpectrum([3.0, 2.0, 0.5])
    assert D.m == 3
    assert D.strict_ordering
    assert not DiagonalSpectrum([1.0, 2.0]).strict_ordering
    assert D.min_gap == pytest.approx(1.0)
    a = np.arange(9.0).reshape(3, 3)
    assert np.allclose(D.commutator(a), D.matrix @ a - a @ D.matrix)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=18, max_size=18))
def test_skew_project_is_idempotent_projection(vals):
    a = (np.array(vals[:9]) + 1j * np.array(vals[9:])).reshape(3, 3)
    p = skew_project(a)
    assert np.allclose(p, -p.conj().T)
    assert np.allclose(np.diag(p), 0)
    assert np.allclose(skew_project(p), p)


def test_potential_grid_rejects_nonuniform_and_empty():
    with pytest.raises(InvalidInput):
        PotentialGrid(np.array([0.0, 0.1, 0.3]), np.zeros((3, 2, 2)))
    with pytest.raises(InvalidInput):
        PotentialGrid(np.array([]), np.zeros((0, 2, 2)))


def test_potential_grid_evaluates_zero_outside():
    z = constant_potential(1.0, 1.0, 20)
    v = z(np.array([-0.5, 0.5, 1.5]))
    assert np.allclose(v[0], 0) and np.allclose(v[2], 0)
    assert np.allclose(v[1], [[0, -1], [1, 0]])


def test_spectral_line_validation():
    with pytest.raises(InvalidInput):
        SpectralLine.uniform(1.0, 100.0, 0.1, M_bound=2.0)      # eta <= M_bound
    with pytest.raises(InvalidInput):
        SpectralLine.uniform(5.0, 20.0, 0.1)                    # half-width < 10 eta
    with pytest.raises(InvalidInput):
        SpectralLine(5.0, np.linspace(-50, 60, 101))            # not symmetric
    line = SpectralLine.uniform(5.0, 100.0, 0.5)
    assert line.step == pytest.approx(0.5)
    assert line.half_width == pytest.approx(100.0)
    assert np.allclose(line.z.imag, -5.0)
    assert line.weights.sum() == pytest.approx(200.0)


def test_weyl_table_not_invertible():
    line = SpectralLine.uniform(2.0, 20.0, 1.0)
    phi = np.broadcast_to(np.eye(2), (line.lam.size, 2, 2)).copy()
    phi[3] = 0
    with pytest.raises(NotInvertible) as err:
        WeylTable(line, phi).inverse()
    assert err.value.lam == pytest.approx(line.lam[3])


# ---------------------------------------------------------------------------
# validate_potential
# ---------------------------------------------------------------------------

def test_validate_zero_potential():
    rep = validate_potential(PotentialGrid.zero(2, 1.0, 10))
    assert rep.passed and rep.sup_norm == 0.0


def test_validate_constant_potential():
    rep = validate_potential(constant_potential(1.0, 1.0, 10))
    assert rep.passed
    assert rep.sup_norm == pytest.approx(np.sqrt(2.0))


def test_validate_diagonal_violation():
    a = np.array([[0.1, -1], [1, 0]], dtype=complex)
    rep = validate_potential(PotentialGrid.constant(a, 1.0, 10))
    assert not rep.passed
    assert rep.diagonal_violation == pytest.approx(0.1)


def test_default_eta():
    assert default_eta(PotentialGrid.zero(2, 1.0, 4)) == 2.0
    assert default_eta(constant_potential(1.0, 1.0, 4)) == pytest.approx(2 * np.sqrt(2) + 1)


# ---------------------------------------------------------------------------
# fundamental solution
# ---------------------------------------------------------------------------

def test_fundamental_solution_zero_potential(D2):
    z = 1.3 - 0.7j
    w = fundamental_solution(D2, PotentialGrid.zero(2, 1.0, 40), z)
    expect = np.zeros_like(w.values)
    expect[:, 0, 0] = np.exp(1j * w.x * z * 2)
    expect[:, 1, 1] = np.exp(1j * w.x * z * 1)
    assert np.allclose(w.values, expect, atol=1e-12)


def test_fundamental_solution_constant_potential(D2):
    z = 0.8 - 3.0j
    fn = ConstantPotentialWeyl(D2, 1.0)
    zeta = constant_potential(1.0, 1.0, 100)
    w = fundamental_solution(D2, zeta, z)
    ref = fn.fundamental_solution(w.x, z)
    assert np.max(frob(w.values - ref) / frob(ref)) < 1e-9
    # independent oracle: matrix exponential of the constant generator
    G = 1j * z * D2.matrix - fn.zeta
    E = expm(G)
    assert frob(w.values[-1] - E) / frob(E) < 1e-8


def test_fundamental_solution_richardson_self_consistency(D2):
    zeta = PotentialGrid.from_function(RandomPotential(2, 1.0, seed=3), 1.0, 200)
    w = fundamental_solution(D2, zeta, 2.0 - 1.0j)
    assert w.error_estimate < 1e-8


def test_fundamental_solution_determinant(D3):
    # zero-trace potential: det w = exp(i x z tr D)
    zeta = PotentialGrid.from_function(RandomPotential(3, 1.0, seed=1), 1.0, 100)
    z = -1.0 - 2.0j
    w = fundamental_solution(D3, zeta, z)
    assert np.allclose(np.linalg.det(w.values), np.exp(1j * z * w.x * 6.0), rtol=1e-8)


def test_fundamental_solution_rejects_invalid_potential(D2):
    bad = PotentialGrid.constant(np.array([[0.1, 0], [0, 0]]), 1.0, 10)
    with pytest.raises(InvalidInput):
        fundamental_solution(D2, bad, 1.0)


def test_magnus_batch_matches_rk4(D2):
    zeta = PotentialGrid.from_function(RandomPotential(2, 1.0, seed=5), 1.0, 100)
    zs = np.array([1.0 - 1.0j, -3.0 - 2.0j])
    W = fundamental_solution_batch(D2, zeta, zs, substeps=2)
    for i, z in enumerate(zs):
        ref = fundamental_solution(D2, zeta, z).values
        assert np.max(frob(W[:, i] - ref) / frob(ref)) < 1e-8


# ---------------------------------------------------------------------------
# constant-potential Weyl function
# ---------------------------------------------------------------------------

def test_constant_weyl_q_zero(D2):
    fn = ConstantPotentialWeyl(D2, 0.0)
    z = np.array([1 - 2j, -4 - 3j])
    assert np.allclose(fn(z), np.eye(2))
    assert np.allclose(fn.alpha, 0)


def test_constant_weyl_alpha(D2):
    fn = ConstantPotentialWeyl(D2, 1.0)
    assert np.allclose(fn.alpha, 1j * np.array([[0, 1], [1, 0]]))
    assert fn.M_bound == pytest.approx(2.0)


def test_constant_weyl_matches_dense_eigensolver(D2):
    fn = ConstantPotentialWeyl(D2, 1.0)
    z = -10j
    G = 1j * z * D2.matrix - fn.zeta
    lam1, lam2 = fn.eigenvalues(z)
    ev = np.sort_complex(np.linalg.eigvals(G))
    assert np.allclose(np.sort_complex(np.array([lam1, lam2])), ev)
    # columns of T are eigenvectors of the generator with eigenvalues lam1, lam2
    T = fn(z)
    assert np.allclose(G @ T, T @ np.diag([lam1, lam2]), atol=1e-12)


def test_constant_weyl_is_bounded_solution(D2):
    # w(x,z) T(z) exp(-ixzD) stays bounded along x for Im z < -M_bound
    fn = ConstantPotentialWeyl(D2, 1.0)
    z = np.array([0.5 - 3.0j, 20 - 5.0j])
    zeta = constant_potential(1.0, 3.0, 300)
    F = transported_weyl(D2, zeta, z, fn(z), substeps=2)
    assert np.max(frob(F)) < 10.0


def test_constant_weyl_branch_cut(D2):
    fn = ConstantPotentialWeyl(D2, 1.0)
    with pytest.raises(BranchPointOnGrid):
        fn(np.array([-1.0j]))


def test_weyl_constant_table(D2, e1_line):
    t = weyl_constant(D2, 1.0, e1_line)
    assert t.alpha_skew and t.source == "closed-form"
    assert t.phi.shape == (e1_line.lam.size, 2, 2)


# ---------------------------------------------------------------------------
# marchenko_M
# ---------------------------------------------------------------------------

def test_marchenko_zero_potential(D2):
    M, phi = marchenko_M(D2, PotentialGrid.zero(2, 1.0, 20), np.array([1 - 2j, 3 - 1j]))
    assert np.allclose(M, np.eye(2))
    assert np.allclose(phi, np.eye(2))


def test_marchenko_reproduces_fundamental_solution(D2):
    zeta = bump_potential(0.5, 1.0, 400, m=2)
    assert zeta.l1_norm() == pytest.approx(0.5 * np.sqrt(2) * 3 / 8, rel=1e-3)
    z = 1.5 - 2.0j
    M, phi = marchenko_M(D2, zeta, np.array([z]))
    x = zeta.x
    E = np.exp(1j * x[:, None] * z * D2.entries)
    w_march = (M[0] * E[:, None, :]) @ np.linalg.inv(phi[0])
    w_ode = fundamental_solution(D2, zeta, z).values
    assert np.max(frob(w_march - w_ode) / frob(w_ode)) < 1e-8


def test_marchenko_tends_to_identity(D2):
    zeta = PotentialGrid.from_function(RandomPotential(2, 1.0, seed=2), 1.0, 200)
    ts = np.array([10.0, 100.0, 1000.0])
    M, _ = marchenko_M(D2, zeta, -1j * ts)
    dev = [np.max(frob(M[i] - np.eye(2))) for i in range(ts.size)]
    assert dev[0] > dev[1] > dev[2]
    assert dev[2] < 1e-2


def test_marchenko_contraction_failure(D2):
    zeta = constant_potential(40.0, 1.0, 40)
    with pytest.raises(ContractionFailure):
        marchenko_M(D2, zeta, np.array([-0.1j]), max_iter=30)


def test_weyl_marchenko_of_truncated_constant(D2):
    # constant potential on [0, sigma]: alpha = M_1(0) is skew-Hermitian
    zeta = constant_potential(1.0, 1.0, 200)
    line = SpectralLine.uniform(5.0, 60.0, 0.5)
    t = weyl_marchenko(D2, zeta, line)
    assert t.source == "integral-equation"
    assert np.allclose(t.alpha, -t.alpha.conj().T)


# ---------------------------------------------------------------------------
# compute_M1
# ---------------------------------------------------------------------------

def test_M1_zero(D2):
    assert np.allclose(compute_M1(D2, PotentialGrid.zero(2, 1.0, 10)).M1, 0)


def test_M1_constant_potential(D2):
    q = 1.0
    zeta = PotentialGrid.constant(np.array([[0, -q], [q, 0]]), 0.5, 50)
    M1 = compute_M1(D2, zeta).M1
    assert M1[-1, 0, 1] == pytest.approx(1j * q / (2 - 1))
    assert np.allclose(M1[-1, :, :][[0, 1], [1, 0]], ConstantPotentialWeyl(D2, q).alpha[[0, 1], [1, 0]])


def test_M1_diagonal_quadrature(D2):
    zeta = PotentialGrid.from_function(RandomPotential(2, 1.0, seed=4), 1.0, 400)
    M1 = compute_M1(D2, zeta).M1
    dens = np.abs(zeta.values[:, 0, 1]) ** 2 / (1.0 - 2.0)
    ref = -1j * np.trapezoid(dens, zeta.x)
    assert M1[-1, 0, 0] == pytest.approx(ref, rel=1e-4)
    assert abs(M1[-1, 0, 0].real) < 1e-15


def test_M1_matches_large_z_asymptotics(D2):
    zeta = PotentialGrid.from_function(RandomPotential(2, 1.0, seed=6), 1.0, 800)
    z = -4000j
    M, _ = marchenko_M(D2, zeta, np.array([z]))
    M1 = compute_M1(D2, zeta).M1
    assert np.max(frob(z * (M[0] - np.eye(2)) - M1)) < 5e-2


# ---------------------------------------------------------------------------
# validate_weyl / fit_alpha
# ---------------------------------------------------------------------------

def test_validate_identity_table():
    line = SpectralLine.uniform(3.0, 60.0, 0.5)
    t = tabulate(lambda z: np.broadcast_to(np.eye(2), z.shape + (2, 2)).copy(), line)
    rep = validate_weyl(t)
    assert rep.passed
    assert np.allclose(rep.alpha, 0)
    assert rep.sup_z_phi == 0 and rep.remainder_l2 == 0


def test_validate_constant_table(e1_table):
    rep = validate_weyl(e1_table)
    assert rep.passed
    assert np.max(np.abs(rep.alpha - 1j * np.array([[0, 1], [1, 0]]))) < 1e-3
    assert rep.inverse_alpha_defect < 1e-6


def test_validate_planted_tail_fails():
    def phi(z):
        base = np.broadcast_to(np.eye(2), z.shape + (2, 2)).astype(complex)
        out = base.copy()
        out[..., 0, 1] = 0.3 * np.exp(-1j * 0.05 * z) / np.sqrt(np.abs(z))   # slowly decaying tail
        return out
    rems = []
    for lam in (100.0, 400.0):
        t = tabulate(phi, SpectralLine.uniform(3.0, lam, 0.1))
        rep = validate_weyl(t)
        rems.append(rep.remainder_l2)
        assert not rep.passed
    assert rems[1] > 1.5 * rems[0]


def test_fit_alpha_inverse(e1_table):
    (c, _), (ci, _) = fit_alpha(e1_table), fit_alpha(e1_table, inverse=True)
    assert np.allclose(ci[0], -c[0], atol=1e-6)


# ---------------------------------------------------------------------------
# weyl_certificate
# ---------------------------------------------------------------------------

def test_certificate_zero_potential(D2):
    z = np.array([1 - 2j, -5 - 4j])
    rep = weyl_certificate(D2, PotentialGrid.zero(2, 2.0, 40), np.broadcast_to(np.eye(2), (2, 2, 2)),
                           2.0, z)
    assert rep.sup_norm == pytest.approx(np.sqrt(2))
    assert rep.passed


def test_certificate_true_vs_wrong_weyl(D2):
    fn = ConstantPotentialWeyl(D2, 1.0)
    zeta = constant_potential(1.0, 4.0, 400)
    z = -1j * np.array([3.0, 4.5, 6.0])
    good = weyl_certificate(D2, zeta, fn(z), 4.0, z)
    bad = weyl_certificate(D2, zeta, np.broadcast_to(np.eye(2), (3, 2, 2)), 4.0, z)
    assert good.passed and good.sup_norm < 10
    assert not bad.passed
    assert bad.profile[-1] > 1e3 * bad.profile[0]


def test_certificate_warns_when_ill_conditioned(D2):
    fn = ConstantPotentialWeyl(D2, 1.0)
    z = np.array([-12j])
    with pytest.warns(DiscretizationWarning):
        weyl_certificate(D2, constant_potential(1.0, 4.0, 100), fn(z), 4.0, z)
