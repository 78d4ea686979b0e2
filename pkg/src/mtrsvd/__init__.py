"""Modified truncated randomized SVD (MTRSVD) for general-form regularization.

Solves ``min ||L x||`` subject to ``min ||A_k x - b||`` where ``A_k`` is a
rank-k truncation of a randomized SVD of ``A``; the correction term is
computed matrix-free by LSQR on ``L (I - Vk Vk^T)``.
"""

from .bounds import BOUND_NAMES, BoundCheckRecord, BoundSpec, empirical_bound_check, eval_bound, sharpness_report
from .driver import (
    MtrsvdSolution,
    NoCornerError,
    SemiConvergenceReport,
    dense_mtrsvd_solution,
    dense_oracle_solution,
    lcurve_corner,
    minimum_norm_solution,
    mtrsvd_solve,
    projected_condition_number,
    semiconvergence_scan,
)
from .kernels import SvdFactors, compact_svd, derive_seed, gaussian_matrix, householder_qr
from .lsqr import BidiagState, LsqrOutcome, lanczos_bidiag_step, lsqr_solve, perturbation_diagnostic, start_bidiag
from .problems import (
    IllPosedProblem,
    NoisyProblem,
    add_noise,
    generate,
    synthetic_spectrum_matrix,
)
from .regularizers import BandedOperator, ProjectedRegularizer, build_regularizer, projected_regularizer
from .rsvd import RsvdResult, TrsvdApproximation, rsvd, rsvd_overdetermined, rsvd_underdetermined, truncate

__version__ = "0.1.0"
