"""Gradient descent on the empirical least-squares risk in coefficient space.

The iterate f_t = sum_i c_i^t K(x_i, .) is driven by

    c_{t+1} = c_t - (beta / n) (K c_t - y),   c_0 = 0,

which is one Gram matvec per step. The run also records, for every t,
the empirical and RKHS norms of the increment f_{t+1} - f_t and the
training residual, which is all the selection rules ever read.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _accel
from .kernels import KernelMatrix, KernelSpec, cross_kernel_matrix
from .spectral import Spectrum

# the iteration diverges beyond beta * sigma_max / n = 2; below 1 every
# residual mode contracts monotonically (no sign flipping)
DIVERGENCE_LIMIT = 2.0
OVERSHOOT_LIMIT = 1.0


@dataclass(frozen=True)
class KgdConfig:
    """Step size and iteration budget for one descent run."""

    step_size: float
    t_max: int
    keep_history: bool = True
    strict_paper: bool = False

    def __post_init__(self):
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")


@dataclass(frozen=True)
class KgdTrace:
    """Per-iteration record for t = 0..t_max.

    ``inc_empirical[t]`` and ``inc_rkhs[t]`` are the norms of
    f_{t+1} - f_t (one extra internal step fills the slot at t_max);
    ``residual_l2[t]`` is ||y - K c_t||. ``coefficients`` and
    ``train_predictions`` (rows K c_t) are None in streaming mode.
    """

    coefficients: np.ndarray | None
    train_predictions: np.ndarray | None
    inc_empirical: np.ndarray
    inc_rkhs: np.ndarray
    residual_l2: np.ndarray
    step_size: float
    overshoot: bool

    @property
    def t_max(self) -> int:
        return self.inc_empirical.shape[0] - 1


def kgd_step(c, matrix: KernelMatrix | np.ndarray, y, beta: float) -> np.ndarray:
    """One descent step: c - (beta/n) (K c - y)."""
    K = matrix.entries if isinstance(matrix, KernelMatrix) else np.asarray(matrix)
    c = np.asarray(c, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n = K.shape[0]
    if c.shape != (n,) or y.shape != (n,):
        raise ValueError(
            f"dimension mismatch: matrix is {K.shape}, c is {c.shape}, y is {y.shape}"
        )
    return c - (beta / n) * (K @ c - y)


def spectral_radius(matrix: KernelMatrix | np.ndarray, iters: int = 200) -> float:
    """Largest eigenvalue via power iteration (deterministic start)."""
    K = matrix.entries if isinstance(matrix, KernelMatrix) else np.asarray(matrix)
    n = K.shape[0]
    v = np.full(n, 1.0 / np.sqrt(n))
    lam = 0.0
    for _ in range(iters):
        w = K @ v
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        v_new = w / norm
        lam_new = float(v_new @ (K @ v_new))
        if abs(lam_new - lam) <= 1e-12 * max(abs(lam_new), 1.0):
            return lam_new
        v, lam = v_new, lam_new
    return lam


def run_kgd(
    matrix: KernelMatrix,
    y,
    config: KgdConfig,
    sigma_max: float | None = None,
) -> KgdTrace:
    """Run the full descent and return the populated trace.

    Raises ValueError when the step size exceeds the divergence limit
    (the error names the spectral radius so the caller can fix beta).
    """
    y = np.asarray(y, dtype=np.float64)
    K = matrix.entries
    n = K.shape[0]
    if y.shape != (n,):
        raise ValueError(f"y must have shape ({n},), got {y.shape}")
    if sigma_max is None:
        sigma_max = spectral_radius(K)
    scaled = config.step_size * sigma_max / n
    if scaled > DIVERGENCE_LIMIT * (1.0 + 1e-9):
        raise ValueError(
            f"step size beta={config.step_size} is inadmissible: "
            f"beta * sigma_max / n = {scaled:.4f} > {DIVERGENCE_LIMIT} "
            f"(sigma_max / n = {sigma_max / n:.4f})"
        )
    overshoot = scaled > OVERSHOOT_LIMIT * (1.0 + 1e-9)
    if config.strict_paper and config.step_size > 1.0 / matrix.kappa:
        warnings.warn(
            f"beta={config.step_size} exceeds 1/kappa={1.0 / matrix.kappa:.4f}",
            RuntimeWarning,
            stacklevel=2,
        )
    coeffs, preds, inc_emp, inc_rkhs, resid, _ = _accel.kgd_iterate(
        K, y, config.step_size, config.t_max, config.keep_history
    )
    return KgdTrace(
        coefficients=coeffs,
        train_predictions=preds,
        inc_empirical=inc_emp,
        inc_rkhs=inc_rkhs,
        residual_l2=resid,
        step_size=config.step_size,
        overshoot=overshoot,
    )


def spectral_solution(spectrum: Spectrum, y, beta: float, t: int) -> np.ndarray:
    """Closed form for the t-th iterate through the spectral filter
    (1 - (1 - beta u)^t) / u applied to the eigenvalues of K / n,
    extended by continuity to t * beta at u = 0.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    y = np.asarray(y, dtype=np.float64)
    n = spectrum.n
    if t == 0:
        return np.zeros(n)
    u = spectrum.eigenvalues / n
    with np.errstate(divide="ignore", invalid="ignore"):
        g = np.where(u > 0, (1.0 - (1.0 - beta * u) ** t) / np.where(u > 0, u, 1.0), t * beta)
    V = spectrum.eigenvectors
    return (V @ (g * (V.T @ y))) / n


def weighted_rkhs_norm(matrix: KernelMatrix | np.ndarray, delta_c, lam: float) -> float:
    """sqrt(dc' K (K/n + lam I) dc), the regularized-operator RKHS norm
    of the function with coefficients dc. Identity:
    equals sqrt(||df||_D^2 + lam ||df||_K^2).
    """
    if lam <= 0:
        raise ValueError("lambda must be positive")
    K = matrix.entries if isinstance(matrix, KernelMatrix) else np.asarray(matrix)
    dc = np.asarray(delta_c, dtype=np.float64)
    n = K.shape[0]
    Kdc = K @ dc
    emp_sq = (Kdc @ Kdc) / n
    rkhs_sq = max(float(dc @ Kdc), 0.0)
    return float(np.sqrt(emp_sq + lam * rkhs_sq))


def predict(spec: KernelSpec, train_inputs, c, query_inputs) -> np.ndarray:
    """Evaluate sum_i c_i K(x_i, .) at the query points."""
    c = np.asarray(c, dtype=np.float64)
    Kq = cross_kernel_matrix(spec, train_inputs, query_inputs)
    if Kq.shape[0] != c.shape[0]:
        raise ValueError(
            f"coefficient length {c.shape[0]} does not match {Kq.shape[0]} training points"
        )
    return Kq.T @ c


def trace_to_csv(trace: KgdTrace, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,inc_empirical,inc_rkhs,residual_l2\n")
        for t in range(trace.t_max + 1):
            fh.write(
                f"{t},{trace.inc_empirical[t]:.12g},"
                f"{trace.inc_rkhs[t]:.12g},{trace.residual_l2[t]:.12g}\n"
            )
