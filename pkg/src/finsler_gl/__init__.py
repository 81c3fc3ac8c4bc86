"""Geodesics of the left-invariant p-norm Finsler metrics on GL(N)."""

from .closed_form import (angular_momentum, is_normal, is_partial_isometry,
                          levi_civita_invariant, metric_at, one_parameter_geodesic,
                          partial_isometry_geodesic, riemannian_exp, riemannian_geodesic)
from .errors import (BranchCutError, FinslerError, FrameBreakError, IntegrationError,
                     NotConvergedError, PreconditionError, SingularDriftError,
                     SingularPointError)
from .flow import (ConservationReport, IntegratorConfig, Trajectory, conservation_report,
                   geodesic_ivp, integrate_hamilton)
from .linalg import (PolarFactors, Spectrum, expm, logm_principal, normalized_trace, p_norm,
                     polar_decompose, positive_power, spectrum_of, trace_inner)
from .shooting import BvpResult, ShootingConfig, distance, geodesic_bvp, riemannian_log
from .spectral import (ProjectionFrame, TransportFrame, equivariance_check, gamma_coefficient,
                       integrate_b, projection_rhs, transport_frame)
from .variational import (DiscretePath, PMetric, el_residual, hamilton_rhs, is_degenerate_direction,
                          legendre, legendre_inverse, p_energy, p_length, second_variation)

__version__ = "0.1.0"
