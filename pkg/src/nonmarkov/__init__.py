"""Non-Markovianity measures for open quantum systems.

Trace-distance (distinguishability) and divisibility witnesses for
two-level master equations in Bloch form, their integrated measures and
upper/lower bounds, plus built-in phase damping, amplitude damping and
weak-coupling spin-boson models.
"""

from .bloch import (DensityMatrix, DimensionError, bloch_to_density, density_to_bloch,
                    generalized_basis, is_physical, trace_norm_difference)
from .canonical import (DecoherenceMatrix, DecoherenceSpectrum, EffectiveHamiltonian,
                        SampledDecoherence, canonical_decomposition, decoherence_matrix_2level,
                        effective_hamiltonian, hermitian_eigenvalues, read_decoherence_table)
from .jacobi import NotHermitianError
from .measures import (MeasureReport, SearchSettings, WitnessTrace, analyze, analyze_nlevel,
                       check_analytic_conditions, gamma_max_trace, gdiv_lb_two_level,
                       gdiv_lower_bound, gdiv_witness, n_div, n_div_modified, n_dst_analytic,
                       n_dst_axis, n_dst_optimized, n_dst_upper_bound,
                       nondivisibility_sufficient, sigma_witness)
from .models import (SpinBosonParams, amplitude_damping, from_canonical, phase_damping,
                     sampled_model, spin_boson_coefficients, spin_boson_model,
                     spin_boson_ndst_ub_approx)
from .propagation import (MapTrajectory, MasterEquation2L, apply_map, choi_and_cp_check,
                          choi_matrix, propagate)

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "DimensionError",
    "bloch_to_density",
    "density_to_bloch",
    "generalized_basis",
    "is_physical",
    "trace_norm_difference",
    "DecoherenceMatrix",
    "DecoherenceSpectrum",
    "EffectiveHamiltonian",
    "SampledDecoherence",
    "canonical_decomposition",
    "decoherence_matrix_2level",
    "effective_hamiltonian",
    "hermitian_eigenvalues",
    "read_decoherence_table",
    "NotHermitianError",
    "MeasureReport",
    "SearchSettings",
    "WitnessTrace",
    "analyze",
    "analyze_nlevel",
    "check_analytic_conditions",
    "gamma_max_trace",
    "gdiv_lb_two_level",
    "gdiv_lower_bound",
    "gdiv_witness",
    "n_div",
    "n_div_modified",
    "n_dst_analytic",
    "n_dst_axis",
    "n_dst_optimized",
    "n_dst_upper_bound",
    "nondivisibility_sufficient",
    "sigma_witness",
    "SpinBosonParams",
    "amplitude_damping",
    "from_canonical",
    "phase_damping",
    "sampled_model",
    "spin_boson_coefficients",
    "spin_boson_model",
    "spin_boson_ndst_ub_approx",
    "MapTrajectory",
    "MasterEquation2L",
    "apply_map",
    "choi_and_cp_check",
    "choi_matrix",
    "propagate",
]
