"""Cut-matrix decompositions of sparse binary matrices.

Decomposes an L_p-regular {0,1} matrix into at most 4^tau cut matrices with
pairwise disjoint supports, with an exhaustively verified cut-norm residual
certificate, plus tensor and MAX-CSP applications at desk scale.
"""

from .csp import (
    Constraint,
    CSPInstance,
    CSPResult,
    approx_max_csp,
    build_type_tensors,
    evaluate_assignment,
    opt_bruteforce,
)
from .engine import (
    DecomposeParams,
    DecompositionResult,
    DecompositionTrace,
    MartingaleReport,
    VerificationReport,
    decompose,
    martingale_check,
    synthesize_params,
    verify_result,
)
from .measure import (
    EXHAUSTIVE_LIMIT,
    FLOAT_TOL,
    BinaryMatrix,
    DimensionLimitError,
    InvalidPartitionError,
    MatrixFormatError,
    RealMatrix,
    Rectangle,
    RectPartition,
    StepMatrix,
    conditional_expectation,
    cut_norm_exact,
    density,
    integral_over,
    iota,
    step_lp_norm,
)
from .oracle import OracleConfig, OracleOutcome, oracle_dispatch, oracle_exact, oracle_heuristic
from .refine import RefineOutcome, RefineParams, envelope_partition, refine_partition
from .regularity import (
    RegularityParams,
    boundedness_vs_regularity_audit,
    generate_w_random,
    holder_bound_check,
    is_bounded,
    regularity_witness_search,
)
from .tensor import (
    BinaryTensor,
    CutTensor,
    TensorDecomposition,
    flatten,
    tensor_cut_norm_exact,
    tensor_decompose,
    tensor_verify,
    unflatten,
)

__version__ = "0.1.0"

__all__ = [
    "EXHAUSTIVE_LIMIT",
    "FLOAT_TOL",
    "BinaryMatrix",
    "BinaryTensor",
    "Constraint",
    "CSPInstance",
    "CSPResult",
    "CutTensor",
    "DecomposeParams",
    "DecompositionResult",
    "DecompositionTrace",
    "DimensionLimitError",
    "InvalidPartitionError",
    "MartingaleReport",
    "MatrixFormatError",
    "OracleConfig",
    "OracleOutcome",
    "RealMatrix",
    "Rectangle",
    "RectPartition",
    "RefineOutcome",
    "RefineParams",
    "RegularityParams",
    "StepMatrix",
    "TensorDecomposition",
    "VerificationReport",
    "approx_max_csp",
    "boundedness_vs_regularity_audit",
    "build_type_tensors",
    "conditional_expectation",
    "cut_norm_exact",
    "decompose",
    "density",
    "envelope_partition",
    "evaluate_assignment",
    "flatten",
    "generate_w_random",
    "holder_bound_check",
    "integral_over",
    "iota",
    "is_bounded",
    "martingale_check",
    "opt_bruteforce",
    "oracle_dispatch",
    "oracle_exact",
    "oracle_heuristic",
    "refine_partition",
    "regularity_witness_search",
    "step_lp_norm",
    "synthesize_params",
    "tensor_cut_norm_exact",
    "tensor_decompose",
    "tensor_verify",
    "unflatten",
    "verify_result",
    "__version__",
]
