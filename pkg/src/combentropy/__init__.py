"""Classical-quantum combs from measurement-based quantum computation and their min-entropy."""

from .errors import CapExceeded, CombError, InvalidInput, SolverFailure
from .operators import (
    LabeledOperator,
    SpaceLayout,
    SubsystemLabel,
    identity,
    is_psd,
    kron,
    link_product,
    partial_trace,
    partial_transpose,
)
from .combs import (
    ClassicalComb,
    ClassicalQuantumComb,
    Comb,
    TimeStepStructure,
    assemble,
    dual_structure,
    multi_round,
    validate_classical_comb,
    validate_comb,
)
from .entropy import (
    MinEntropyResult,
    SolverConfig,
    classical_bounds,
    extract_strategy,
    min_entropy,
    min_entropy_classical,
    monotonicity_check,
    multi_round_bounds,
)
from .gflow import OpenGraph, correction_sets, enumerate_gflows, verify_gflow
from .mbqc import build_D_calibr, build_D_gflow, build_D_mp, build_sigma_mbqc
from .observational import observational_search
from .bqc import AngleSet, build_D_client, closed_angle_set, theorem_bounds

__all__ = [
    "AngleSet",
    "CapExceeded",
    "ClassicalComb",
    "ClassicalQuantumComb",
    "Comb",
    "CombError",
    "InvalidInput",
    "LabeledOperator",
    "MinEntropyResult",
    "SolverFailure",
    "SpaceLayout",
    "SubsystemLabel",
    "TimeStepStructure",
    "OpenGraph",
    "SolverConfig",
    "assemble",
    "build_D_calibr",
    "build_D_client",
    "build_D_gflow",
    "build_D_mp",
    "build_sigma_mbqc",
    "classical_bounds",
    "closed_angle_set",
    "correction_sets",
    "enumerate_gflows",
    "extract_strategy",
    "dual_structure",
    "identity",
    "is_psd",
    "kron",
    "link_product",
    "min_entropy",
    "min_entropy_classical",
    "monotonicity_check",
    "multi_round",
    "multi_round_bounds",
    "observational_search",
    "partial_trace",
    "partial_transpose",
    "theorem_bounds",
    "validate_classical_comb",
    "validate_comb",
    "verify_gflow",
]

__version__ = "0.1.0"
