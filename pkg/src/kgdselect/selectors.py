"""Iteration-count selection rules.

The central rule scans backward for the largest iteration whose
successive-increment statistic still dominates the variance proxy; the
hybrid strategy tunes that rule's constant on a held-out split of a
subsample and then reapplies it to the full data. The remaining rules
(oracle baseline, hold-out, balancing, Lepskii-type grid comparison,
Rademacher early stopping, discrepancy, AIC, BIC) exist for benchmark
comparisons and share the same trace/tables inputs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .datagen import Dataset
from .descent import KgdConfig, KgdTrace, predict, run_kgd
from .errors import ConfigError, UnsupportedOperationError
from .kernels import KernelSpec, build_kernel_matrix, cross_kernel_matrix
from .spectral import SpectralTables, build_tables, eigendecompose
from .utils import rng_for


@dataclass(frozen=True)
class FittedModel:
    """A kernel expansion sum_i c_i K(x_i, .) ready for prediction."""

    spec: KernelSpec
    train_inputs: np.ndarray
    coefficients: np.ndarray

    def predict(self, query_inputs) -> np.ndarray:
        return predict(self.spec, self.train_inputs, self.coefficients, query_inputs)


@dataclass
class SelectionResult:
    """Outcome of one selection rule."""

    rule: str
    t_selected: int
    constant_used: float | None = None
    hit_horizon: bool = False
    diagnostics: dict = field(default_factory=dict)
    model: FittedModel | None = None

    def to_json_dict(self) -> dict:
        return {
            "rule": self.rule,
            "t": self.t_selected,
            "constant": self.constant_used,
            "hit_horizon": self.hit_horizon,
            "diagnostics": {k: float(v) for k, v in self.diagnostics.items()},
        }


@dataclass(frozen=True)
class ConstantGrid:
    """Descending grid of positive candidate constants."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 1 or v.size == 0:
            raise ValueError("grid must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("grid constants must be finite and strictly positive")
        if np.any(np.diff(v) > 0):
            raise ValueError("grid constants must be sorted descending")
        object.__setattr__(self, "values", v)


def constant_grid(c0: float = 100.0, q: float = 0.9, count: int = 21) -> ConstantGrid:
    """Geometric grid c0 * q^k, k = 0..count-1 (descending for q < 1)."""
    return ConstantGrid(values=c0 * q ** np.arange(count, dtype=np.float64))


# ---------------------------------------------------------------------------
# backward selection
# ---------------------------------------------------------------------------

def bsp_statistic(trace: KgdTrace, horizon: int) -> np.ndarray:
    """t * ||f_{t+1}-f_t||_D + sqrt(t) * ||f_{t+1}-f_t||_K for t = 1..horizon,
    returned indexed by t (slot 0 is nan)."""
    ts = np.arange(1, horizon + 1, dtype=np.float64)
    stat = np.full(horizon + 1, np.nan)
    stat[1:] = ts * trace.inc_empirical[1 : horizon + 1] + np.sqrt(ts) * trace.inc_rkhs[
        1 : horizon + 1
    ]
    return stat


class _BackwardScan:
    """Largest t in [1, horizon] with statistic(t) >= C * W(t), for many C.

    The ratio statistic/W is reduced to its suffix maxima, which are
    non-increasing in t, so each constant resolves with one binary
    search instead of a linear scan.
    """

    def __init__(self, trace: KgdTrace, tables: SpectralTables, horizon: int,
                 threshold_factor: float = 1.0):
        if horizon < 1:
            raise ValueError("horizon must be >= 1")
        if horizon > trace.t_max:
            raise ValueError(
                f"horizon {horizon} exceeds trace length {trace.t_max}"
            )
        if horizon > tables.t_max:
            raise ValueError(
                f"horizon {horizon} exceeds spectral table length {tables.t_max}"
            )
        stat = bsp_statistic(trace, horizon)[1:]
        w = tables.w_values[1 : horizon + 1] * threshold_factor
        self.horizon = horizon
        self.ratio = stat / w
        self.suffix_max = np.maximum.accumulate(self.ratio[::-1])[::-1]

    def t_hat(self, constant: float) -> tuple[int, bool]:
        if constant <= 0:
            return self.horizon, False
        count = int(np.searchsorted(-self.suffix_max, -constant, side="right"))
        if count == 0:
            return self.horizon, True
        return count, False

    def t_hat_many(self, constants: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        counts = np.searchsorted(-self.suffix_max, -np.asarray(constants), side="right")
        hit = counts == 0
        ts = np.where(hit, self.horizon, np.maximum(counts, 1))
        ts = np.where(np.asarray(constants) <= 0, self.horizon, ts)
        hit = hit & (np.asarray(constants) > 0)
        return ts.astype(int), hit


BackwardScan = _BackwardScan


def bsp_select(
    trace: KgdTrace,
    tables: SpectralTables,
    constant: float,
    horizon: int,
    delta: float | None = None,
) -> SelectionResult:
    """Backward selection: the largest t in [1, horizon] where the
    increment statistic is at least ``constant`` times the variance
    proxy; falls back to the horizon when no t qualifies.

    ``delta`` switches on the strict form whose threshold carries the
    explicit log^2(16/delta) confidence factor; by default that factor
    is absorbed into the constant, which is how the tuned grids use it.
    """
    if constant < 0:
        raise ValueError("constant must be >= 0")
    factor = math.log(16.0 / delta) ** 2 if delta is not None else 1.0
    scan = _BackwardScan(trace, tables, horizon, threshold_factor=factor)
    t_hat, hit = scan.t_hat(constant)
    return SelectionResult(
        rule="bsp",
        t_selected=t_hat,
        constant_used=constant,
        hit_horizon=hit,
        diagnostics={"horizon": horizon, "threshold_factor": factor},
    )


# ---------------------------------------------------------------------------
# hybrid strategy: tune the constant on a held-out split, reapply in full
# ---------------------------------------------------------------------------

def log_uniform_candidates_coarse(
    min_exponent: int = -10, max_exponent: int = 7
) -> np.ndarray:
    """Coarse log-scale probe {0} U {2^k}, descending."""
    vals = [0.0] + [2.0**k for k in range(min_exponent, max_exponent + 1)]
    return np.array(sorted(vals, reverse=True))


def _refine_window(coarse_desc: np.ndarray, best_idx: int,
                   interval: float, max_candidates: int) -> np.ndarray:
    asc = coarse_desc[::-1]
    pos = asc.size - 1 - best_idx
    lo = asc[pos - 1] if pos > 0 else 0.0
    hi = asc[pos + 1] if pos + 1 < asc.size else asc[pos] * 2.0
    if hi <= lo:
        hi = lo + interval
    step = max(interval, (hi - lo) / max_candidates)
    cand = np.arange(lo + step, hi + step / 2.0, step)
    return cand[::-1]


def hybrid_select(
    data: Dataset,
    spec: KernelSpec,
    config: KgdConfig,
    grid: ConstantGrid | np.ndarray | None = None,
    subsample: int | None = None,
    split_ratio: float = 0.7,
    delta: float = 0.05,
    seed: int = 0,
    horizon_policy: str = "tmax",
    tuning_splits: int = 1,
    refine_interval: float = 2.0**-10,
    max_refine_candidates: int = 4096,
    full_matrix=None,
    full_spectrum=None,
    full_tables: SpectralTables | None = None,
    full_trace: KgdTrace | None = None,
) -> SelectionResult:
    """Run the full hybrid pipeline on a dataset.

    Steps: subsample L points, split them ``split_ratio`` into a tuning
    train/validation pair, run the descent on both the tuning half and
    the full data, score every candidate constant by validation MSE of
    the backward-selected iterate, and reapply the winning constant to
    the full-data trace.

    ``horizon_policy`` picks the search caps:

    * ``"tmax"`` (default) both passes scan [1, t_max]; matches the
      experimental setting where the maximum iteration count is n.
    * ``"algorithm"`` constant pass capped at the sudden-stop horizon,
      final pass at t_max.
    * ``"strict"`` both passes capped at the sudden-stop horizon.

    ``tuning_splits`` > 1 scores each constant by the average validation
    MSE over that many independent splits (repeated hold-out, the
    cross-validation flavor of the constant search); 1 is the single
    hold-out split.

    When ``grid`` is None the constant is searched log-uniformly: a
    coarse powers-of-two scan followed by a uniform refinement with
    interval ``refine_interval``.
    """
    n = data.n
    L = n if subsample is None else int(subsample)
    if not 1 <= L <= n:
        raise ValueError(f"subsample must lie in [1, {n}], got {L}")
    if not 0.0 < split_ratio < 1.0:
        raise ValueError("split_ratio must lie in (0, 1)")
    if L < 2:
        raise ValueError("subsample too small to split into train and validation")
    if horizon_policy not in ("tmax", "algorithm", "strict"):
        raise ValueError(f"unknown horizon_policy {horizon_policy!r}")
    if tuning_splits < 1:
        raise ValueError("tuning_splits must be >= 1")

    if full_matrix is None:
        full_matrix = build_kernel_matrix(spec, data.inputs)
    if full_spectrum is None:
        full_spectrum = eigendecompose(full_matrix)
    if full_tables is None:
        full_tables = build_tables(
            full_spectrum, n, config.t_max, delta=delta, kappa=spec.kappa
        )
    if full_trace is None:
        full_trace = run_kgd(
            full_matrix, data.outputs, config,
            sigma_max=float(full_spectrum.eigenvalues[0]),
        )

    T = full_tables.sudden_stop_T
    cap_const = config.t_max if horizon_policy == "tmax" else min(T, config.t_max)
    cap_final = (
        min(T, config.t_max) if horizon_policy == "strict" else config.t_max
    )

    scans = []
    val_curves = []
    n_tr = min(L - 1, max(1, int(round(split_ratio * L))))
    for s in range(tuning_splits):
        stream = "hss-split" if s == 0 else f"hss-split-{s}"
        chosen = rng_for(seed, stream).permutation(n)[:L]
        tr_idx, val_idx = chosen[:n_tr], chosen[n_tr:]
        x_tr, y_tr = data.inputs[tr_idx], data.outputs[tr_idx]
        x_val, y_val = data.inputs[val_idx], data.outputs[val_idx]
        sub_matrix = build_kernel_matrix(spec, x_tr)
        sub_spectrum = eigendecompose(sub_matrix)
        sub_tables = build_tables(
            sub_spectrum, n_tr, cap_const, delta=delta, kappa=spec.kappa
        )
        sub_trace = run_kgd(
            sub_matrix, y_tr, KgdConfig(config.step_size, cap_const),
            sigma_max=float(sub_spectrum.eigenvalues[0]),
        )
        scans.append(_BackwardScan(sub_trace, sub_tables, cap_const))
        preds_val = sub_trace.coefficients @ cross_kernel_matrix(spec, x_tr, x_val)
        val_curves.append(np.mean((preds_val - y_val[None, :]) ** 2, axis=1))

    def score(constants: np.ndarray) -> np.ndarray:
        total = np.zeros(np.asarray(constants).shape)
        for scan, val_mse in zip(scans, val_curves):
            ts, _ = scan.t_hat_many(constants)
            total += val_mse[ts]
        return total / len(scans)

    if grid is not None:
        candidates = grid.values if isinstance(grid, ConstantGrid) else np.asarray(grid)
        if candidates.size == 0:
            raise ValueError("constant grid is empty")
        scores = score(candidates)
        j_star = int(np.argmin(scores))  # ties: smallest index = largest constant
        chosen_c = float(candidates[j_star])
    else:
        coarse = log_uniform_candidates_coarse()
        coarse_scores = score(coarse)
        best = int(np.argmin(coarse_scores))
        refined = _refine_window(coarse, best, refine_interval, max_refine_candidates)
        if refined.size:
            refined_scores = score(refined)
            rbest = int(np.argmin(refined_scores))
            if refined_scores[rbest] <= coarse_scores[best]:
                chosen_c = float(refined[rbest])
            else:
                chosen_c = float(coarse[best])
        else:
            chosen_c = float(coarse[best])
        if chosen_c <= 0.0:
            chosen_c = float(refine_interval)

    final = bsp_select(full_trace, full_tables, chosen_c, cap_final)
    t_star = final.t_selected
    model = None
    if full_trace.coefficients is not None:
        model = FittedModel(
            spec=spec,
            train_inputs=np.asarray(data.inputs),
            coefficients=full_trace.coefficients[t_star].copy(),
        )
    return SelectionResult(
        rule="hss",
        t_selected=t_star,
        constant_used=chosen_c,
        hit_horizon=final.hit_horizon,
        diagnostics={
            "sudden_stop_T": T,
            "subsample": L,
            "n_tuning_train": n_tr,
            "tuning_splits": tuning_splits,
            "validation_mse": float(score(np.array([chosen_c]))[0]),
            "constant_pass_horizon": cap_const,
            "final_pass_horizon": cap_final,
        },
        model=model,
    )


# ---------------------------------------------------------------------------
# comparison rules
# ---------------------------------------------------------------------------

def baseline_select(train_predictions: np.ndarray, clean_targets) -> SelectionResult:
    """Oracle reference: argmin_t of the in-sample error against the true
    targets (synthetic data only; ties go to the smallest t)."""
    if clean_targets is None:
        raise UnsupportedOperationError(
            "baseline selection needs clean targets, which this dataset lacks"
        )
    clean = np.asarray(clean_targets, dtype=np.float64)
    P = np.asarray(train_predictions)
    if P.ndim != 2 or P.shape[1] != clean.shape[0]:
        raise ValueError("predictions must be (t_max+1, n) matching clean targets")
    errs = np.mean((P - clean[None, :]) ** 2, axis=1)
    t = int(np.argmin(errs))
    return SelectionResult(
        rule="bs", t_selected=t, diagnostics={"train_mse": float(errs[t])}
    )


def holdout_select(
    data: Dataset,
    spec: KernelSpec,
    config: KgdConfig,
    seed: int = 0,
) -> SelectionResult:
    """Split 1:1, train on one half, pick the t minimizing validation MSE.

    The returned model is the half-data expansion at the selected t,
    mirroring the cost this rule pays for its split.
    """
    n = data.n
    if n < 2:
        raise ValueError("hold-out needs at least 2 samples")
    rng = rng_for(seed, "ho-split")
    perm = rng.permutation(n)
    n_tr = n // 2
    tr_idx, val_idx = perm[:n_tr], perm[n_tr:]
    x_tr, y_tr = data.inputs[tr_idx], data.outputs[tr_idx]
    x_val, y_val = data.inputs[val_idx], data.outputs[val_idx]
    matrix = build_kernel_matrix(spec, x_tr)
    trace = run_kgd(matrix, y_tr, KgdConfig(config.step_size, config.t_max))
    preds_val = trace.coefficients @ cross_kernel_matrix(spec, x_tr, x_val)
    mse = np.mean((preds_val - y_val[None, :]) ** 2, axis=1)
    t = int(np.argmin(mse))
    return SelectionResult(
        rule="ho",
        t_selected=t,
        diagnostics={"validation_mse": float(mse[t]), "n_train": n_tr},
        model=FittedModel(spec, x_tr, trace.coefficients[t].copy()),
    )


def pairwise_pred_norms(trace: KgdTrace, cap: int) -> np.ndarray:
    """Matrix D[t, t'] = ||f_{t'} - f_t||_D over 0..cap, for rules doing
    item-wise comparisons repeatedly (e.g. while tuning a constant)."""
    P = trace.train_predictions[: cap + 1]
    n = P.shape[1]
    sq = np.sum(P * P, axis=1)
    g = P @ P.T
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * g, 0.0)
    return np.sqrt(d2 / n)


def bp_select(
    trace: KgdTrace,
    tables: SpectralTables,
    constant: float,
    delta: float = 0.05,
    t_cap: int | None = None,
    norms: np.ndarray | None = None,
) -> SelectionResult:
    """Balancing principle: the smallest t whose empirical distance to
    every later iterate stays below the scaled variance proxy."""
    cap = min(trace.t_max, tables.t_max)
    if t_cap is not None:
        cap = min(cap, t_cap)
    if trace.train_predictions is None:
        raise ValueError("balancing needs a trace with history")
    factor = math.log(16.0 / delta) ** 4
    thr = constant * tables.w_values[: cap + 1] * factor
    n = trace.train_predictions.shape[1]
    P = trace.train_predictions
    for t in range(1, cap):
        if norms is not None:
            dist = norms[t, t + 1 : cap + 1]
        else:
            diff = P[t + 1 : cap + 1] - P[t]
            dist = np.sqrt(np.sum(diff * diff, axis=1) / n)
        if np.all(dist <= thr[t + 1 : cap + 1]):
            return SelectionResult(
                rule="bp", t_selected=t, constant_used=constant, hit_horizon=False
            )
    # at t = cap the comparison set is empty, which counts as a default
    return SelectionResult(rule="bp", t_selected=cap, constant_used=constant,
                           hit_horizon=True)


def lp_grid(n: int, kappa: float, q: float, delta: float,
            effective_dimension: np.ndarray, t_limit: int) -> list[int]:
    """Geometric candidate times q^i / kappa^2 (rounded up, deduplicated)
    filtered by the effective-dimension cap."""
    if q <= 1.0:
        raise ValueError("q must exceed 1")
    raw = []
    i = 0
    while True:
        t = q**i / kappa**2
        if t > t_limit:
            break
        raw.append(max(1, math.ceil(t)))
        i += 1
    times = sorted(set(t for t in raw if t <= t_limit))
    l_dq = 2.0 * math.log(8.0 * math.log(n) / (delta * math.log(q)))
    cap1 = n / (100.0 * kappa**2 * l_dq**2)
    kept = []
    for t in times:
        cap2 = n / (3.0 * kappa**2 * (effective_dimension[t] + 1.0))
        if t <= max(cap1, cap2):
            kept.append(t)
    if not kept:
        raise ConfigError(
            f"Lepskii grid is empty: no candidate time passes the caps "
            f"(n/(100 k^2 L^2) = {cap1:.3f}, effective-dimension cap at the "
            f"smallest time = {n / (3.0 * kappa**2 * (effective_dimension[times[0]] + 1.0)):.3f})"
        )
    return kept


def lp_select(
    trace: KgdTrace,
    tables: SpectralTables,
    matrix,
    constant: float,
    q: float = 2.0,
    delta: float = 0.05,
    kappa: float = 1.0,
) -> SelectionResult:
    """Lepskii-type rule on a geometric time grid: the smallest grid time
    whose regularized-operator distance to every later grid iterate is
    bounded by the scaled effective-dimension proxy."""
    if trace.train_predictions is None or trace.coefficients is None:
        raise ValueError("this rule needs a trace with history")
    cap = min(trace.t_max, tables.t_max)
    times = lp_grid(tables.n, kappa, q, delta, tables.effective_dimension, cap)
    n = tables.n
    nd = tables.effective_dimension
    wstar = {t: math.sqrt(t) * (nd[t] + 1.0) / math.sqrt(n) for t in times}
    P = trace.train_predictions
    C = trace.coefficients
    for idx, t in enumerate(times):
        ok = True
        for t2 in times[idx + 1 :]:
            dP = P[t2] - P[t]
            dc = C[t2] - C[t]
            val = math.sqrt(max((dP @ dP) / n + (dc @ dP) / t2, 0.0))
            if val > constant * wstar[t2]:
                ok = False
                break
        if ok:
            return SelectionResult(
                rule="lp", t_selected=t, constant_used=constant, hit_horizon=False,
                diagnostics={"grid_size": len(times)},
            )
    return SelectionResult(
        rule="lp", t_selected=times[-1], constant_used=constant, hit_horizon=True,
        diagnostics={"grid_size": len(times)},
    )


def esr_select(
    spectrum,
    n: int,
    beta: float,
    noise_std: float,
    constant: float = 2.0 * math.e,
    t_max: int | None = None,
) -> SelectionResult:
    """Early stopping: first t where the local Rademacher complexity at
    scale 1/sqrt(t beta) exceeds the noise-scaled threshold."""
    if noise_std <= 0:
        raise ValueError("noise_std must be positive")
    if beta <= 0:
        raise ValueError("beta must be positive")
    cap = n if t_max is None else t_max
    mu = np.sort(np.asarray(
        spectrum.eigenvalues if hasattr(spectrum, "eigenvalues") else spectrum
    ) / n)[::-1]
    prefix = np.concatenate([[0.0], np.cumsum(mu)])
    ts = np.arange(1, cap + 1, dtype=np.float64)
    eta = ts * beta
    eps_sq = 1.0 / eta
    k = np.searchsorted(-mu, -eps_sq, side="left")  # count of mu > eps^2
    # the k large eigenvalues saturate at eps^2, the rest contribute themselves
    sums = k * eps_sq + (prefix[mu.size] - prefix[k])
    lhs = np.sqrt(sums / n)
    rhs = constant / (noise_std * eta)
    hits = np.nonzero(lhs > rhs)[0]
    if hits.size == 0:
        return SelectionResult(
            rule="esr", t_selected=cap, constant_used=constant, hit_horizon=True
        )
    return SelectionResult(
        rule="esr", t_selected=int(hits[0] + 1), constant_used=constant,
        hit_horizon=False,
    )


def dp_select(
    trace: KgdTrace,
    noise_std_estimate: float,
    constant: float,
    n: int,
) -> SelectionResult:
    """Discrepancy principle: first t whose training residual drops to
    the noise floor C * sigma_hat * sqrt(n)."""
    if noise_std_estimate < 0:
        raise ValueError("noise estimate must be >= 0")
    thr = constant * noise_std_estimate * math.sqrt(n)
    hits = np.nonzero(trace.residual_l2 <= thr)[0]
    if hits.size == 0:
        return SelectionResult(
            rule="dp", t_selected=trace.t_max, constant_used=constant,
            hit_horizon=True, diagnostics={"threshold": thr},
        )
    return SelectionResult(
        rule="dp", t_selected=int(hits[0]), constant_used=constant,
        hit_horizon=False, diagnostics={"threshold": thr},
    )


def _information_select(trace, tables, constant, n, rule, penalty_scale):
    cap = min(trace.t_max, tables.t_max)
    score = trace.residual_l2[1 : cap + 1] + (
        constant * penalty_scale
    ) * tables.w_values[1 : cap + 1]
    t = int(np.argmin(score)) + 1
    return SelectionResult(
        rule=rule, t_selected=t, constant_used=constant,
        diagnostics={"score": float(score[t - 1])},
    )


def aic_select(trace: KgdTrace, tables: SpectralTables, constant: float,
               n: int) -> SelectionResult:
    """Penalized residual argmin with the variance proxy as complexity."""
    if constant <= 0:
        raise ValueError("constant must be positive")
    return _information_select(trace, tables, constant, n, "aic", 1.0)


def bic_select(trace: KgdTrace, tables: SpectralTables, constant: float,
               n: int) -> SelectionResult:
    """Same as the AIC variant with an extra log(n) penalty factor."""
    if constant <= 0:
        raise ValueError("constant must be positive")
    return _information_select(trace, tables, constant, n, "bic", math.log(n))


# ---------------------------------------------------------------------------
# noise level estimation
# ---------------------------------------------------------------------------

def _morton_order(X: np.ndarray, bits: int = 16) -> np.ndarray:
    """Sort key interleaving the quantized coordinate bits (Z-order)."""
    n, d = X.shape
    lo = X.min(axis=0)
    span = X.max(axis=0) - lo
    span[span == 0.0] = 1.0
    q = ((X - lo) / span * (2**bits - 1)).astype(np.uint64)
    keys = np.zeros(n, dtype=np.uint64)
    for b in range(bits):
        for j in range(d):
            keys |= ((q[:, j] >> np.uint64(b)) & np.uint64(1)) << np.uint64(b * d + j)
    return np.argsort(keys, kind="stable")


def estimate_noise_std(y, inputs) -> float:
    """First-order difference estimate of the noise standard deviation,
    with samples ordered along the first coordinate (d=1) or a
    space-filling key (d>1)."""
    y = np.asarray(y, dtype=np.float64)
    n = y.shape[0]
    if n < 3:
        raise ValueError("need at least 3 samples to estimate the noise level")
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    order = np.argsort(X[:, 0], kind="stable") if X.shape[1] == 1 else _morton_order(X)
    diffs = np.diff(y[order])
    return float(np.sqrt(np.sum(diffs**2) / (2.0 * (n - 1))))
