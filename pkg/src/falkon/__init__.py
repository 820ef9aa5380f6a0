"""FALKON: large-scale kernel ridge regression.

Nystrom centers, a preconditioner built from two Cholesky factorizations of
the center kernel matrix, and conjugate gradient on the preconditioned
system; plus exact baselines, leverage-score sampling and diagnostics.
"""
from .data import (
    Dataset,
    DatasetFormatError,
    NormStats,
    load_dense_csv,
    load_sparse_index_value,
    split_train_test,
    write_dense_csv,
    write_sparse_index_value,
    zscore_apply,
    zscore_fit,
)
from .kernels import KernelSpec, kernel_block, kernel_eval, kernel_square
from .linalg import (
    DivergenceError,
    NotPositiveDefiniteError,
    cholesky_upper,
    conjugate_gradient,
    pivoted_qr,
    sym_eig,
    tri_solve,
)
from .sampling import (
    CenterSelection,
    LeverageScores,
    exact_leverage_scores,
    multinomial_counts,
    sample_leverage,
    sample_uniform,
)
from .preconditioner import (
    PreconditionerFactors,
    apply_B,
    apply_Bt,
    build_full_rank,
    build_preconditioner,
    build_rank_deficient,
)
from .solver import (
    FalkonConfig,
    FalkonModel,
    falkon_predict,
    falkon_train,
    falkon_train_basic_gradient,
    knm_times_vector,
    load_model,
    save_model,
)
from .baselines import IterTrace, cg_nystrom_unpreconditioned, gd_nystrom, krr_direct, nystrom_direct
from .metrics import EvalReport, auc, classification_error, regression_metrics
from .diagnostics import (
    condition_number_W,
    effective_dimension,
    n_infinity_empirical,
    suggested_M_leverage,
    suggested_M_uniform,
    theory_report,
)

__version__ = "0.1.0"
