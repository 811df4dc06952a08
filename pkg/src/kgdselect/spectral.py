"""Eigendecomposition and the spectral scalars behind the selection rules.

All quantities reduce to sums over the Gram matrix eigenvalues, so they
are precomputed in one pass over t = 1..t_max and stored in lookup
tables (recomputing per rule would repeat the same O(n) sums).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import NumericError
from .kernels import KernelMatrix

PSD_TOL = 1e-8


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (descending, negatives clipped to 0) and eigenvectors."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n(self) -> int:
        return self.eigenvalues.shape[0]


def eigendecompose(matrix: KernelMatrix | np.ndarray) -> Spectrum:
    """Full symmetric eigendecomposition with a PSD sanity check.

    Eigenvalues within the PSD tolerance of zero are clipped to exactly
    zero so the downstream formulas never see negative inputs under a
    square root or logarithm.
    """
    K = matrix.entries if isinstance(matrix, KernelMatrix) else np.asarray(matrix)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("kernel matrix must be square")
    if not np.array_equal(K, K.T):
        raise ValueError("kernel matrix must be exactly symmetric")
    try:
        vals, vecs = np.linalg.eigh(K)
    except np.linalg.LinAlgError as exc:
        diag = np.diag(K)
        raise NumericError(
            "eigendecomposition failed: "
            f"n={K.shape[0]}, diag range [{diag.min():.3e}, {diag.max():.3e}], "
            f"frob norm {np.linalg.norm(K):.3e}"
        ) from exc
    vmax = max(vals[-1], 0.0)
    if vals[0] < -PSD_TOL * max(vmax, 1e-300):
        raise NumericError(
            f"matrix is not PSD within tolerance: min eigenvalue {vals[0]:.3e} "
            f"vs max {vmax:.3e}"
        )
    order = np.argsort(vals)[::-1]
    vals = np.clip(vals[order], 0.0, None)
    vecs = vecs[:, order]
    return Spectrum(eigenvalues=vals, eigenvectors=vecs)


def _eigs(spectrum: Spectrum | np.ndarray) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        return spectrum.eigenvalues
    return np.asarray(spectrum, dtype=np.float64)


def empirical_effective_dimension(spectrum, n: int, lam: float) -> float:
    """Trace of (lambda n I + K)^{-1} K via the eigenvalue form."""
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    sig = _eigs(spectrum)
    return float(np.sum(sig / (sig + lam * n)))


def variance_proxy_w(spectrum, n: int, t: int) -> float:
    """Data-dependent variance proxy, non-decreasing in t."""
    if t < 1:
        raise ValueError("t must be >= 1")
    nd = empirical_effective_dimension(spectrum, n, 1.0 / t)
    return math.sqrt(t) / n + math.sqrt(max(nd, 1.0)) * (
        1.0 + math.sqrt(t / n)
    ) / math.sqrt(n)


def concentration_u(spectrum, n: int, t: int, delta: float) -> float:
    """Concentration term controlling the safe search horizon."""
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if t < 1:
        raise ValueError("t must be >= 1")
    nd = empirical_effective_dimension(spectrum, n, 1.0 / t)
    inner = math.log(
        1.0 + 8.0 * math.log(64.0 / delta) * math.sqrt(t / n) * max(1.0, nd)
    )
    x = inner * t / n
    return x + math.sqrt(x)


def horizon_constant(kappa: float) -> float:
    return max((kappa**2 + 1.0) / 3.0, 2.0 * math.sqrt(kappa**2 + 1.0))


def sudden_stop_horizon(spectrum, n: int, kappa: float, delta: float) -> int:
    """Largest t in [1, n] keeping the concentration term below 1/2.

    Monotonicity of the concentration term in t makes the set of
    admissible t an interval, so a backward scan suffices. If even
    t = 1 violates the bound the horizon degenerates to 1 and a
    warning is emitted.
    """
    c1 = horizon_constant(kappa)
    if c1 * concentration_u(spectrum, n, 1, delta) > 0.5:
        warnings.warn(
            "concentration bound already violated at t=1; horizon degenerates to 1",
            RuntimeWarning,
            stacklevel=2,
        )
        return 1
    lo, hi = 1, n
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if c1 * concentration_u(spectrum, n, mid, delta) <= 0.5:
            lo = mid
        else:
            hi = mid - 1
    return lo


def local_rademacher(spectrum, n: int, epsilon: float) -> float:
    """Local empirical Rademacher complexity at scale epsilon.

    Uses eigenvalues of K / n (operator scale), the convention of the
    early-stopping literature this quantity feeds.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    mu = _eigs(spectrum) / n
    return math.sqrt(float(np.sum(np.minimum(mu, epsilon**2))) / n)


@dataclass(frozen=True)
class SpectralTables:
    """Per-t lookup tables; index arrays by t directly (slot 0 is unused)."""

    n: int
    t_max: int
    delta: float
    kappa: float
    effective_dimension: np.ndarray
    w_values: np.ndarray
    u_values: np.ndarray
    sudden_stop_T: int

    def w(self, t: int) -> float:
        return float(self.w_values[t])

    def u(self, t: int) -> float:
        return float(self.u_values[t])


def build_tables(
    spectrum, n: int, t_max: int, delta: float = 0.05, kappa: float = 1.0
) -> SpectralTables:
    """Precompute N_D(1/t), the variance proxy and the concentration term
    for t = 1..t_max, plus the sudden-stop horizon over [1, min(n, t_max)].
    """
    if t_max < 1:
        raise ValueError("t_max must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    sig = _eigs(spectrum)
    ts = np.arange(1, t_max + 1, dtype=np.float64)

    nd = np.empty(t_max + 1)
    nd[0] = np.nan
    # chunked so the (t, n) outer product stays small for large n
    chunk = max(1, int(2e6 // max(n, 1)))
    for start in range(0, t_max, chunk):
        tt = ts[start : start + chunk]
        lam_n = n / tt
        nd[start + 1 : start + 1 + tt.size] = np.sum(
            sig[None, :] / (sig[None, :] + lam_n[:, None]), axis=1
        )

    nd_floor = np.maximum(nd[1:], 1.0)
    w = np.empty(t_max + 1)
    w[0] = np.nan
    w[1:] = np.sqrt(ts) / n + np.sqrt(nd_floor) * (1.0 + np.sqrt(ts / n)) / math.sqrt(n)

    inner = np.log(
        1.0 + 8.0 * math.log(64.0 / delta) * np.sqrt(ts / n) * nd_floor
    )
    x = inner * ts / n
    u = np.empty(t_max + 1)
    u[0] = np.nan
    u[1:] = x + np.sqrt(x)

    c1 = horizon_constant(kappa)
    horizon_span = min(n, t_max)
    ok = c1 * u[1 : horizon_span + 1] <= 0.5
    if not ok[0]:
        warnings.warn(
            "concentration bound already violated at t=1; horizon degenerates to 1",
            RuntimeWarning,
            stacklevel=2,
        )
        T = 1
    elif ok.all():
        T = horizon_span
    else:
        T = int(np.argmin(ok))  # first False; U monotone makes the set a prefix
    return SpectralTables(
        n=n,
        t_max=t_max,
        delta=delta,
        kappa=kappa,
        effective_dimension=nd,
        w_values=w,
        u_values=u,
        sudden_stop_T=T,
    )


def tables_to_csv(tables: SpectralTables, path) -> None:
    """Dump (t, N_D, W, U) rows for plot scripts."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("t,N_D,W,U\n")
        for t in range(1, tables.t_max + 1):
            fh.write(
                f"{t},{tables.effective_dimension[t]:.12g},"
                f"{tables.w_values[t]:.12g},{tables.u_values[t]:.12g}\n"
            )
