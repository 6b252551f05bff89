"""Half-space toolkit for time-dependent anisotropic Maxwell systems.

Builds the symmetric first-order form of the Maxwell equations with a
perfectly conducting wall, checks and repairs the initial-time
compatibility conditions, verifies the algebraic cancellation and
factorization identities the normal-derivative recovery rests on, runs
an energy-stable finite-difference evolution, and measures the weighted
energy estimates on finished runs.
"""

from .charts import (ChartDescriptor, DegenerateChart, Normalizer,
                     identity_chart, normalize, pullback_solution,
                     pushforward_data, rotation_chart, tilt_chart,
                     transport_operator, vertical_stretch_chart)
from .compat import (CompatReport, CorrectedInitial, LiftFailure,
                     SingularMass, SingularTheta, check_compatibility,
                     correct_initial_data, kernel_solve, s_mp)
from .divergence import (InconsistentSystem, MuTilde, NotInSpan,
                         RecoveryOperators, cancellation_residual,
                         cancellation_sweep, decompose_mu, generalized_div,
                         lambda_trace_pair, recover_normal_derivative)
from .fields import (ConstantField, FieldDescriptor, SampledField,
                     SymbolicField, TimeSampledField, as_field)
from .grid import Grid
from .materials import (CoefficientSet, MaterialLaw, PositivityViolation,
                        SymmetryViolation, assemble_coefficients,
                        fm_norm_estimate)
from .mollify import (MollifierPair, ScaleOrderError, chi_transfer,
                      mollify_normal, mollify_tangential)
from .norms import (GridSeries, NormReport, boundary_sobolev_norm, em_norm,
                    gm_norm, ha_norm, weighted_tangential_norm)
from .scenario import Scenario, ScenarioError, load_scenario
from .solver import (CflViolation, FieldState, NonFiniteField, RunRecord,
                     cfl_timestep, divergence_residuals, run, step,
                     update_charge, wall_condition_residual)
from .structure import (FactorizationError, StructureMatrixSet,
                        apply_curl_operator, build_structure_matrices,
                        levi_civita)
from .verify import (CompatibilityFailure, EstimateReport, RunFailure,
                     verify_hm_estimate, verify_l2_estimate,
                     verify_tangential_estimate)

__version__ = "0.1.0"
