"""Darboux dressing of the zero potential and a short N-wave evolution.

Part 1 propagates the two-pole example and compares with its closed forms,
then dresses the zero potential with a rank-one seed (a full-rank seed with
A = a I gives Q proportional to I and hence a trivial potential). Part 2 evolves the constant-potential data with
D~ = diag(1, 3) and reports the residual of the N-wave equation under refinement.
"""
import numpy as np

from nwave_weyl import (ClosedFormExample, DiagonalSpectrum, PotentialGrid, SpectralLine,
                        init_gbdt, nwave_residual, propagate_gbdt, solve_ibvp,
                        transformed_potential, weyl_constant)

D = DiagonalSpectrum([2.0, 1.0])

# 1. GBDT
ex = ClosedFormExample(0.3 + 1.0j, np.array([[1.0, 0.5], [0.2 - 0.3j, 1.0]]), D)
zero = PotentialGrid.zero(2, 1.0, 200)
tr = propagate_gbdt(ex.triple(), D, zero, substeps=4)
print("Pi vs closed form:", np.max(np.abs(tr.Pi - ex.Pi(tr.x))))
print("identity residual along x:", tr.identity_residual)
a, f = 0.2 + 0.8j, np.array([[1.0, 0.7]])
seed = init_gbdt(np.array([[a]]), 1j / (a - np.conj(a)) * (f @ f.conj().T), f)
zt, _ = transformed_potential(propagate_gbdt(seed, D, zero, substeps=4), D, zero)
print("|zeta~| at x = 0, 0.5, 1:", [round(float(np.linalg.norm(zt.values[k])), 4)
                                   for k in (0, 100, 200)])

# 2. evolution
DB = np.array([1.0, 3.0])
for n, half_width, step in ((10, 100.0, 0.1), (20, 200.0, 0.05)):
    table = weyl_constant(D, 1.0, SpectralLine.uniform(5.0, half_width, step, M_bound=2.0))
    sol = solve_ibvp(table, D, DB, 0.5, 0.5, n, n)
    mx, mean = nwave_residual(sol.u, sol.x, sol.t, D, DB)
    print(f"n={n}: N-wave residual max {mx:.2e}, mean {mean:.2e}")
