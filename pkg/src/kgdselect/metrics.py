"""Error metrics and bias/variance diagnostics.

The population norm is approximated by the empirical L2 norm over a
clean test sample drawn from the input distribution (the plug-in
estimate; no density weighting).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .datagen import Dataset, evaluate_target
from .descent import KgdConfig, run_kgd
from .errors import UnsupportedOperationError
from .kernels import KernelSpec, build_kernel_matrix, cross_kernel_matrix
from .spectral import eigendecompose


@dataclass(frozen=True)
class ErrorReport:
    """Root-mean-square and maximum absolute error on clean targets."""

    l2: float
    linf: float
    n_test: int


def test_errors(predictions, clean_targets) -> ErrorReport:
    p = np.asarray(predictions, dtype=np.float64)
    c = np.asarray(clean_targets, dtype=np.float64)
    if p.shape != c.shape or p.ndim != 1 or p.size < 1:
        raise ValueError(f"length mismatch: {p.shape} vs {c.shape}")
    dev = p - c
    return ErrorReport(
        l2=float(np.sqrt(np.mean(dev**2))),
        linf=float(np.max(np.abs(dev))),
        n_test=p.size,
    )


@dataclass(frozen=True)
class BiasVarianceCurves:
    """Per-iteration decomposition on a clean test sample.

    bias[t] is the test error of the noise-free run, variance[t] the
    distance between the noisy and noise-free runs, total[t] the noisy
    run's test error.
    """

    t: np.ndarray
    bias: np.ndarray
    variance: np.ndarray
    total: np.ndarray


def bias_variance_curves(
    data: Dataset,
    spec: KernelSpec,
    config: KgdConfig,
    test_inputs,
) -> BiasVarianceCurves:
    """Run the descent twice (noisy outputs, clean targets) over identical
    inputs and evaluate both iterate paths on the test sample."""
    if data.clean_targets is None:
        raise UnsupportedOperationError("bias/variance needs clean targets")
    test_inputs = np.asarray(test_inputs, dtype=np.float64)
    if test_inputs.ndim == 1:
        test_inputs = test_inputs.reshape(-1, 1)
    truth = evaluate_target(data.meta.target_id, test_inputs)

    matrix = build_kernel_matrix(spec, data.inputs)
    sigma_max = float(eigendecompose(matrix).eigenvalues[0])
    noisy = run_kgd(matrix, data.outputs, config, sigma_max=sigma_max)
    clean = run_kgd(matrix, data.clean_targets, config, sigma_max=sigma_max)

    K_cross = cross_kernel_matrix(spec, data.inputs, test_inputs)
    pred_noisy = noisy.coefficients @ K_cross
    pred_clean = clean.coefficients @ K_cross

    def rms(rows):
        return np.sqrt(np.mean(rows**2, axis=1))

    return BiasVarianceCurves(
        t=np.arange(config.t_max + 1),
        bias=rms(pred_clean - truth[None, :]),
        variance=rms(pred_noisy - pred_clean),
        total=rms(pred_noisy - truth[None, :]),
    )


def curves_to_csv(curves: BiasVarianceCurves, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,bias,variance,total\n")
        for i, t in enumerate(curves.t):
            fh.write(
                f"{t},{curves.bias[i]:.12g},{curves.variance[i]:.12g},"
                f"{curves.total[i]:.12g}\n"
            )
