"""Desk-scale toolkit for multi-mode Marangoni instability design.

Pipeline: dispersion relation of the linearized surface-tension-driven layer
-> inverse design of vertical temperature profiles pinning zero growth rates
at prescribed wave numbers -> quadratic amplitude system at the bifurcation
point -> realization of prescribed chaotic dynamics (Lorenz) by slow-fast
embedding -> reconstruction of the spatio-temporal surface patterns.
"""

from .params import (ComplexEigenvalue, ConvergenceError, DesignError,
                     FluidParams, MarangoniError, ValidationError)
from .mollify import MollifierSpec, mollifier
from .profiles import (ProfileParams, StepProfile, TemperatureProfile,
                       g_kappa, mollified_step, polynomial_coefficients,
                       transform_closed_form)
from .spectral import (dispersion_residual_exact, dispersion_residual_limit,
                       greens_weight, real_axis_roots, solve_eigenvalue,
                       spectrum_scan, stream_profile, theta_profile,
                       vorticity_profile)
from .design import (DesignResult, design_profile, fixed_point_map,
                     solve_tilde_p, verify_design)
from .modes import (Inhomogeneity, ModeBasis, QuadraticNormalForm,
                    assemble_normal_form, build_mode_basis, compute_G_tensor,
                    compute_M_matrix, compute_f, invert_M_design,
                    make_inhomogeneity, poisson_bracket_project)
from .quadsys import (Decomposition, QuadraticSystem, ReducedField,
                      check_p_decomposition, embed_target, evaluate_rhs,
                      lorenz_field, slow_manifold)
from .dynamics import (Trajectory, integrate, lyapunov_exponent,
                       manifold_deviation, realize_to_accuracy, rhs_gap)
from .patterns import (PatternSpec, reconstruct_field, reconstruct_surface,
                       write_pgm)

__version__ = "0.1.0"
