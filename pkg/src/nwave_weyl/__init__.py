"""Direct and inverse spectral problems for the N-wave auxiliary system."""
__version__ = "0.1.0"

from .errors import (AliasingRisk, BranchPointOnGrid, ConditioningError, ContractionFailure,
                     DiscretizationWarning, DomainMismatch, IntegrationFailure, InvalidDarbouxData,
                     InvalidInput, NotInvertible, NWaveError, PositivityLoss,
                     ReconstructionWarning, ResolventSingularity, SingularOperator)
from .spectral_core import (ConstantPotentialWeyl, DiagonalSpectrum, PotentialGrid, SpectralLine,
                            WeylTable, default_eta, fit_alpha, fundamental_solution, marchenko_M,
                            skew_project, tabulate, transported_weyl, validate_potential,
                            validate_weyl, weyl_certificate, weyl_constant, weyl_marchenko)
from .inverse_solver import (alpha_hat, assemble_S, build_kernel_s, compute_K, compute_Pi,
                             identity_report, inversion_pipeline, invert_weyl,
                             verify_identity_AS)
from .gbdt import (ClosedFormExample, init_gbdt, propagate_gbdt, transformed_potential,
                   transformed_weyl, verify_darboux_ode)
from .evolution import evolve_weyl, nwave_residual, shifted_weyl, solve_ibvp
from .borg_marchenko import BumpPerturbedWeyl, PipelineConfig, RaySpec, bm_verdict
from .potentials import RandomPotential, constant_potential, random_potential
