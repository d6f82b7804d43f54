"""Verification strategies for bipartite pure quantum states.

Build adaptive local-measurement strategies for a target state, compute
their spectral gaps, optimize over the one-way and two-way strategy
classes with a convex relaxation, and simulate the resulting protocols.
"""

from .constructors import (
    fourier_pair,
    group_generators,
    near_optimal_two_way,
    one_way_optimal,
    two_qubit_one_way,
    two_qubit_theta,
    two_qubit_two_way,
)
from .linalg import BipartiteDims, kron, partial_trace, partial_transpose, swap_operator
from .protocol import (
    SimReport,
    chernoff_confidence,
    confidence_iid,
    copies_needed,
    kl_divergence,
    report_to_dict,
    simulate,
    worst_case_state,
)
from .relaxation import (
    RelaxationSolution,
    SolverNonConvergence,
    SolverOptions,
    ppt_min_eigenvalue,
    reconstruct_omega,
    solution_to_dict,
    solve_one_way_relaxation,
    solve_two_way_relaxation,
)
from .states import (
    DensityOperator,
    SchmidtState,
    density,
    fidelity,
    from_schmidt,
    schmidt_decompose,
    state_from_dict,
    state_to_dict,
    state_vector,
)
from .strategy import (
    A_TO_B,
    B_TO_A,
    ConditionalTest,
    SpectralGap,
    Strategy,
    ValidationReport,
    assemble_omega,
    conditional_outcome,
    spectral_gap,
    strategy_from_dict,
    strategy_to_dict,
    swap_symmetrize,
    twirl,
    validate_semi_optimal_one_way,
    validate_two_way,
)

__version__ = "0.1.0"

__all__ = [
    "A_TO_B",
    "B_TO_A",
    "BipartiteDims",
    "ConditionalTest",
    "DensityOperator",
    "RelaxationSolution",
    "SchmidtState",
    "SimReport",
    "SolverNonConvergence",
    "SolverOptions",
    "SpectralGap",
    "Strategy",
    "ValidationReport",
    "assemble_omega",
    "chernoff_confidence",
    "conditional_outcome",
    "confidence_iid",
    "copies_needed",
    "density",
    "fidelity",
    "fourier_pair",
    "from_schmidt",
    "group_generators",
    "kl_divergence",
    "kron",
    "near_optimal_two_way",
    "one_way_optimal",
    "partial_trace",
    "partial_transpose",
    "ppt_min_eigenvalue",
    "reconstruct_omega",
    "report_to_dict",
    "schmidt_decompose",
    "simulate",
    "solution_to_dict",
    "solve_one_way_relaxation",
    "solve_two_way_relaxation",
    "spectral_gap",
    "state_from_dict",
    "state_to_dict",
    "state_vector",
    "strategy_from_dict",
    "strategy_to_dict",
    "swap_operator",
    "swap_symmetrize",
    "twirl",
    "two_qubit_one_way",
    "two_qubit_theta",
    "two_qubit_two_way",
    "validate_semi_optimal_one_way",
    "validate_two_way",
    "worst_case_state",
]
