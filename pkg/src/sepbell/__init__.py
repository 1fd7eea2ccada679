"""Certify nonlocality from separable two-party marginals.

The package builds a three-qubit state whose two-qubit reductions are all
separable, proves via semidefinite programming that those marginals admit a
unique global extension, and demonstrates Bell-inequality violations of the
extension, so that the marginals alone certify nonlocality.
"""

from .bell import (BellExpression, ConditionalDecomposition, EvaluationResult,
                   MeasurementSet, Observable, bell_operator,
                   builtin_expression, conditional_decomposition,
                   equatorial_observable, evaluate, horodecki_chsh,
                   local_bound, polar_observable, quantum_value,
                   reference_bi_measurements, reference_mermin_measurements,
                   sliwa4_analysis, sliwa4_quantum_value)
from .config import TARGETS, TOL
from .linalg import (PAULI, dagger, hermitian_eigen, kron, partial_trace,
                     partial_transpose)
from .optimize import (NelderMeadConfig, SeesawResult, nelder_mead,
                       optimize_family, optimize_measurements, seesaw_search,
                       seesaw_measurement_step, seesaw_state_step)
from .sdp import (MarginalExtensionProblem, SdpProblem, SdpSolution,
                  UniquenessReport, component_extremum, solve,
                  uniqueness_test)
from .separability import (SeparabilityReport, certify_all_marginals,
                           det_partial_transpose, ppt_min_eigenvalue)
from .states import (DensityMatrix, FamilyParameters, REFERENCE_PARAMETERS,
                     build_family_state, correlation_tensor, ghz_state,
                     marginal_tensor, product_state, reference_state,
                     state_from_tensor)

__version__ = "0.1.0"
