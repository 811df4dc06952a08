"""Synthetic regression data, covariate-shift test sets and CSV ingestion.

Targets:

* ``g1`` the tent function on [0, 1] (d = 1)
* ``g2`` the radial bump (1-r)^6 (35 r^2 + 18 r + 3) supported on the
  unit ball (d = 3); evaluated exactly as printed, no rescaling for the
  corner region of the cube where r exceeds 1.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import IngestionError
from .utils import rng_for


@dataclass(frozen=True)
class DatasetMeta:
    target_id: str = ""
    noise_std: float = 0.0
    seed: int = 0
    shift_b: float = 1.0
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Dataset:
    """Inputs, noisy outputs and (when synthetic) the clean targets."""

    inputs: np.ndarray
    outputs: np.ndarray
    clean_targets: np.ndarray | None
    meta: DatasetMeta

    @property
    def n(self) -> int:
        return self.inputs.shape[0]

    @property
    def d(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class ShiftConfig:
    """Covariate-shift test-set settings; b = 1 recovers the unshifted law."""

    b: float = 1.0
    kde_bandwidth: float = 0.05
    quadrature_order: int = 64

    def __post_init__(self):
        if self.b < 1.0:
            raise ValueError("shift endpoint b must be >= 1")
        if self.kde_bandwidth <= 0:
            raise ValueError("kde_bandwidth must be positive")
        if self.quadrature_order < 2:
            raise ValueError("quadrature_order must be at least 2")


def target_g1(x):
    """Tent target: x below 1/2, then 1 - x (formula applied verbatim
    outside [0, 1] as well)."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x <= 0.5, x, 1.0 - x)


def target_g2(x):
    """Radial bump on the unit ball of R^3, exactly zero outside it."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    pts = x.reshape(1, 3) if single else x
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError("g2 expects points in R^3")
    r = np.linalg.norm(pts, axis=1)
    val = np.where(
        r <= 1.0, (1.0 - r) ** 6 * (35.0 * r**2 + 18.0 * r + 3.0), 0.0
    )
    return float(val[0]) if single else val


TARGETS = {
    "g1": (1, lambda X: target_g1(X[:, 0])),
    "g2": (3, lambda X: target_g2(X)),
}


def target_dimension(target: str) -> int:
    if target not in TARGETS:
        raise ValueError(f"unknown target {target!r}; choose from {sorted(TARGETS)}")
    return TARGETS[target][0]


def evaluate_target(target: str, inputs: np.ndarray) -> np.ndarray:
    d, fn = TARGETS[target]
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.shape[1] != d:
        raise ValueError(f"target {target} expects dimension {d}, got {X.shape[1]}")
    return fn(X)


def gen_dataset(target: str, n: int, noise_std: float, seed: int) -> Dataset:
    """Inputs i.i.d. uniform on the unit cube, outputs = target + N(0, s^2)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = target_dimension(target)
    rng = rng_for(seed, "train-inputs", target)
    X = rng.uniform(0.0, 1.0, size=(n, d))
    clean = evaluate_target(target, X)
    noise_rng = rng_for(seed, "train-noise", target)
    noise = noise_rng.normal(0.0, noise_std, size=n) if noise_std > 0 else np.zeros(n)
    return Dataset(
        inputs=X,
        outputs=clean + noise,
        clean_targets=clean,
        meta=DatasetMeta(target_id=target, noise_std=noise_std, seed=seed),
    )


def gen_shifted_testset(
    target: str, m: int, shift: ShiftConfig, seed: int
) -> Dataset:
    """Noise-free test set with inputs uniform on [0, b]^d."""
    if m < 1:
        raise ValueError("m must be >= 1")
    d = target_dimension(target)
    rng = rng_for(seed, "test-inputs", target)
    X = rng.uniform(0.0, shift.b, size=(m, d))
    clean = evaluate_target(target, X)
    return Dataset(
        inputs=X,
        outputs=clean.copy(),
        clean_targets=clean,
        meta=DatasetMeta(target_id=target, noise_std=0.0, seed=seed, shift_b=shift.b),
    )


# ---------------------------------------------------------------------------
# KL divergence between kernel density estimates (d = 1)
# ---------------------------------------------------------------------------

_DENSITY_FLOOR = 1e-12


def _kde_at(points: np.ndarray, samples: np.ndarray, bandwidth: float) -> np.ndarray:
    z = (points[:, None] - samples[None, :]) / bandwidth
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (
        samples.size * bandwidth * math.sqrt(2.0 * math.pi)
    )
    return np.maximum(dens, _DENSITY_FLOOR)


def kl_divergence(train_inputs, test_inputs, cfg: ShiftConfig | None = None) -> float:
    """KL divergence D(P_train || Q_test) between Gaussian-KDE densities,
    integrated by composite Gauss-Legendre quadrature over the pooled
    support padded by three bandwidths. Densities are floored at 1e-12
    before the log so disjoint supports stay finite.
    """
    cfg = cfg or ShiftConfig()
    p_samples = np.asarray(train_inputs, dtype=np.float64).reshape(-1)
    q_samples = np.asarray(test_inputs, dtype=np.float64).reshape(-1)
    if p_samples.size < 2 or q_samples.size < 2:
        raise ValueError("need at least two points in each sample to estimate KL")
    h = cfg.kde_bandwidth
    lo = min(p_samples.min(), q_samples.min()) - 3.0 * h
    hi = max(p_samples.max(), q_samples.max()) + 3.0 * h
    nodes, weights = np.polynomial.legendre.leggauss(cfg.quadrature_order)
    # composite panels keep the rule resolving features at the KDE scale
    n_panels = max(1, int(math.ceil((hi - lo) / max(10.0 * h, 1e-12))))
    total = 0.0
    edges = np.linspace(lo, hi, n_panels + 1)
    for a, b in zip(edges[:-1], edges[1:]):
        x = 0.5 * (b - a) * nodes + 0.5 * (a + b)
        w = 0.5 * (b - a) * weights
        p = _kde_at(x, p_samples, h)
        q = _kde_at(x, q_samples, h)
        total += float(np.sum(w * p * np.log(p / q)))
    return total


# ---------------------------------------------------------------------------
# real-data ingestion
# ---------------------------------------------------------------------------

GEO_INPUT_COLUMNS = ("phi", "theta", "h")
GEO_VALUE_COLUMNS = ("total_intensity", "declination")


def load_geomagnetic_csv(path, value_column: str) -> Dataset:
    """Read (phi, theta, h, total_intensity, declination) rows and
    normalize the coordinates to [-1, 1]^3 by per-column min-max.

    The raw per-column minima and maxima are kept in the metadata so
    the affine map can be inverted (or applied to another file).
    """
    if value_column not in GEO_VALUE_COLUMNS:
        raise ValueError(
            f"value_column must be one of {GEO_VALUE_COLUMNS}, got {value_column!r}"
        )
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (*GEO_INPUT_COLUMNS, value_column) if c not in header]
        if missing:
            raise IngestionError(
                f"{path}: missing required column(s) {', '.join(missing)}"
            )
        for i, row in enumerate(reader, start=2):
            try:
                rows.append(
                    [float(row[c]) for c in GEO_INPUT_COLUMNS] + [float(row[value_column])]
                )
            except (TypeError, ValueError) as exc:
                raise IngestionError(f"{path}: unparsable row {i}: {exc}") from exc
    if not rows:
        raise IngestionError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=np.float64)
    raw = arr[:, :3]
    lo, hi = raw.min(axis=0), raw.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    inputs = 2.0 * (raw - lo) / span - 1.0
    return Dataset(
        inputs=inputs,
        outputs=arr[:, 3],
        clean_targets=arr[:, 3].copy(),
        meta=DatasetMeta(
            target_id=f"geo:{value_column}",
            extra={"input_min": lo.tolist(), "input_max": hi.tolist()},
        ),
    )


def normalize_like(raw_coords: np.ndarray, reference: Dataset) -> np.ndarray:
    """Apply another dataset's stored min-max affine map to raw coordinates."""
    lo = np.asarray(reference.meta.extra["input_min"])
    hi = np.asarray(reference.meta.extra["input_max"])
    span = np.where(hi > lo, hi - lo, 1.0)
    return 2.0 * (np.asarray(raw_coords, dtype=np.float64) - lo) / span - 1.0


def denormalize(dataset: Dataset) -> np.ndarray:
    """Recover the raw coordinates from the stored affine map."""
    lo = np.asarray(dataset.meta.extra["input_min"])
    hi = np.asarray(dataset.meta.extra["input_max"])
    span = np.where(hi > lo, hi - lo, 1.0)
    return (dataset.inputs + 1.0) / 2.0 * span + lo


def add_truncated_gaussian_noise(
    data: Dataset, sigma: float, truncation: float = 2.0, seed: int = 0
) -> Dataset:
    """Add Gaussian noise rejected outside +-truncation*sigma (resampled)."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0.0:
        return data
    rng = rng_for(seed, "trunc-noise")
    n = data.n
    noise = rng.normal(0.0, sigma, size=n)
    bound = truncation * sigma
    bad = np.abs(noise) > bound
    while bad.any():
        noise[bad] = rng.normal(0.0, sigma, size=int(bad.sum()))
        bad = np.abs(noise) > bound
    return replace(
        data,
        outputs=data.outputs + noise,
        clean_targets=data.outputs.copy(),
        meta=replace(data.meta, noise_std=sigma, seed=seed),
    )


def dataset_to_csv(data: Dataset, path) -> None:
    """Export as x1..xd, y and (when available) the clean target."""
    d = data.d
    cols = [f"x{j + 1}" for j in range(d)] + ["y"]
    if data.clean_targets is not None:
        cols.append("clean")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(cols)
        for i in range(data.n):
            row = [f"{v:.12g}" for v in data.inputs[i]] + [f"{data.outputs[i]:.12g}"]
            if data.clean_targets is not None:
                row.append(f"{data.clean_targets[i]:.12g}")
            writer.writerow(row)
