"""Kernel gradient descent regression with adaptive iteration selection."""

from ._accel import backend_name
from .datagen import (
    Dataset,
    ShiftConfig,
    add_truncated_gaussian_noise,
    gen_dataset,
    gen_shifted_testset,
    kl_divergence,
    load_geomagnetic_csv,
    target_g1,
    target_g2,
)
from .descent import (
    KgdConfig,
    KgdTrace,
    kgd_step,
    predict,
    run_kgd,
    spectral_solution,
    weighted_rkhs_norm,
)
from .kernels import (
    KernelMatrix,
    KernelSpec,
    build_kernel_matrix,
    cross_kernel_matrix,
    eval_kernel,
)
from .metrics import ErrorReport, bias_variance_curves, test_errors
from .runner import ExperimentConfig, run_experiment
from .selectors import (
    ConstantGrid,
    FittedModel,
    SelectionResult,
    aic_select,
    baseline_select,
    bic_select,
    bp_select,
    bsp_select,
    constant_grid,
    dp_select,
    esr_select,
    estimate_noise_std,
    holdout_select,
    hybrid_select,
    lp_select,
)
from .spectral import (
    SpectralTables,
    Spectrum,
    build_tables,
    concentration_u,
    eigendecompose,
    empirical_effective_dimension,
    local_rademacher,
    sudden_stop_horizon,
    variance_proxy_w,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
