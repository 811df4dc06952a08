"""Configuration-driven experiment runner.

Reproduces the simulation studies at desk scale: a constant sweep for
the backward rule, the ten-method comparison, the covariate-shift
study, and the real-data pipeline over local CSV files. Emits
machine-readable CSV tables consumed by the figure scripts.
"""

from __future__ import annotations

import csv
import json
import math
import time
import tracemalloc
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import selectors
from .datagen import (
    Dataset,
    ShiftConfig,
    add_truncated_gaussian_noise,
    denormalize,
    gen_dataset,
    gen_shifted_testset,
    kl_divergence,
    load_geomagnetic_csv,
    normalize_like,
)
from .descent import KgdConfig, run_kgd
from .errors import ConfigError, UnsupportedOperationError
from .kernels import KernelSpec, build_kernel_matrix, cross_kernel_matrix
from .metrics import bias_variance_curves, curves_to_csv, test_errors
from .selectors import FittedModel, SelectionResult
from .spectral import build_tables, eigendecompose, tables_to_csv
from .utils import rng_for

METHODS = ("bs", "ho", "bp", "lp", "esr", "dp", "aic", "bic", "bsp", "hss")
EXPERIMENTS = (
    "sim1_constant_sweep",
    "sim2_method_comparison",
    "sim3_covariate_shift",
    "realdata",
)

RESULT_COLUMNS = (
    "method", "d", "n", "trial", "seed", "t_selected", "constant_used",
    "l2", "linf", "wall_time_s", "peak_mem_mb",
)

SWEEP_COLUMNS = ("constant", "t_selected", "hit_horizon", "l2", "linf")
SHIFT_COLUMNS = (
    "method", "b", "kl_divergence", "trial", "l2", "linf",
    "delta_l2_pct", "delta_linf_pct",
)

_DEFAULT_BETA = {1: 1.0, 3: 3.0}
_TUNE_GRID = 2.0 ** np.arange(6, -11, -1, dtype=np.float64)  # 64 .. 2^-10


@dataclass
class ResultRow:
    method: str
    d: int
    n: int
    trial: int
    seed: int
    t_selected: int
    constant_used: float | None
    l2: float
    linf: float
    wall_time_s: float
    peak_mem_mb: float

    def as_csv(self) -> list[str]:
        c = "" if self.constant_used is None else f"{self.constant_used:.10g}"
        return [
            self.method, str(self.d), str(self.n), str(self.trial),
            str(self.seed), str(self.t_selected), c,
            f"{self.l2:.10g}", f"{self.linf:.10g}",
            f"{self.wall_time_s:.6g}", f"{self.peak_mem_mb:.6g}",
        ]


@dataclass
class ExperimentConfig:
    experiment: str = "sim2_method_comparison"
    sizes: list = field(default_factory=lambda: [1000])
    dims: list = field(default_factory=lambda: [1])
    methods: list = field(default_factory=lambda: ["hss", "ho"])
    trials: int = 10
    seed: int = 0
    noise_std: float = 0.6
    test_size: int = 500
    delta: float = 0.05
    t_max: int | str = "n"
    beta: dict = field(default_factory=lambda: dict(_DEFAULT_BETA))
    workers: int = 1
    # hybrid strategy settings
    hss_subsample_fraction: float = 1.0
    hss_split_ratio: float = 0.7
    hss_horizon_policy: str = "tmax"
    hss_tuning_splits: int = 5
    hss_grid: list | None = None
    hss_refine_interval: float = 2.0**-10
    # fixed or tuned constants for the comparison rules
    constants: dict = field(default_factory=dict)
    lp_q: float = 2.0
    # sim1 sweep
    sweep_constants: list | None = None
    # sim3 shift
    shift_b_values: list = field(default_factory=lambda: [1.1, 1.2, 1.3, 1.4, 1.5])
    kde_bandwidth: float = 0.05
    quadrature_order: int = 64
    # realdata
    train_csv: str | None = None
    test_csv: str | None = None
    value_column: str = "total_intensity"
    realdata_sigma: float | None = None
    realdata_truncation: float = 2.0
    realdata_beta: float | None = None
    realdata_subsample: int | None = None

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError([f"unknown config key: {k}" for k in unknown])
        cfg = cls(**raw)
        if "beta" in raw:
            cfg.beta = {int(k): float(v) for k, v in raw["beta"].items()}
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def validate(self) -> None:
        problems = []
        if self.experiment not in EXPERIMENTS:
            problems.append(
                f"experiment must be one of {EXPERIMENTS}, got {self.experiment!r}"
            )
        if self.trials < 1:
            problems.append("trials must be >= 1")
        if not self.methods:
            problems.append("methods must be non-empty")
        for m in self.methods:
            if m not in METHODS:
                problems.append(f"unknown method {m!r}; valid: {METHODS}")
        for d in self.dims:
            if d not in (1, 3):
                problems.append(f"dims entries must be 1 or 3, got {d}")
        for n in self.sizes:
            if not isinstance(n, int) or n < 2:
                problems.append(f"sizes entries must be integers >= 2, got {n}")
        if not 0 < self.delta < 1:
            problems.append("delta must lie in (0, 1)")
        if isinstance(self.t_max, str) and self.t_max != "n":
            problems.append("t_max must be an integer or the string 'n'")
        if isinstance(self.t_max, int) and self.t_max < 1:
            problems.append("integer t_max must be >= 1")
        if not 0 < self.hss_split_ratio < 1:
            problems.append("hss_split_ratio must lie in (0, 1)")
        if not 0 < self.hss_subsample_fraction <= 1:
            problems.append("hss_subsample_fraction must lie in (0, 1]")
        if self.hss_horizon_policy not in ("tmax", "algorithm", "strict"):
            problems.append("hss_horizon_policy must be tmax|algorithm|strict")
        if self.hss_tuning_splits < 1:
            problems.append("hss_tuning_splits must be >= 1")
        if self.test_size < 1:
            problems.append("test_size must be >= 1")
        if self.workers < 1:
            problems.append("workers must be >= 1")
        if self.experiment == "realdata":
            if not self.train_csv or not self.test_csv:
                problems.append("realdata needs train_csv and test_csv paths")
            if self.value_column not in ("total_intensity", "declination"):
                problems.append("value_column must be total_intensity|declination")
        for b in self.shift_b_values:
            if b < 1.0:
                problems.append(f"shift b values must be >= 1, got {b}")
        if problems:
            raise ConfigError(problems)

    def t_max_for(self, n: int) -> int:
        return n if self.t_max == "n" else int(self.t_max)

    def beta_for(self, d: int) -> float:
        return float(self.beta.get(d, _DEFAULT_BETA[d]))


def kernel_spec_for_dim(d: int) -> KernelSpec:
    if d == 1:
        return KernelSpec(family="sobolev_min", dimension=1)
    if d == 3:
        return KernelSpec(family="wendland_3d", dimension=3)
    raise ConfigError([f"no default kernel for dimension {d}"])


# ---------------------------------------------------------------------------
# per-trial machinery
# ---------------------------------------------------------------------------

class _TrialContext:
    """Shared per-trial artifacts, built lazily so each method only pays
    for what it uses (and shared pieces are built once)."""

    def __init__(self, cfg: ExperimentConfig, data: Dataset, spec: KernelSpec,
                 beta: float, t_max: int, seed: int):
        self.cfg = cfg
        self.data = data
        self.spec = spec
        self.beta = beta
        self.t_max = t_max
        self.seed = seed
        self.kgd_config = KgdConfig(step_size=beta, t_max=t_max)
        self._matrix = None
        self._spectrum = None
        self._tables = None
        self._trace = None
        self._noise_est = None
        self._tuning = None

    @property
    def matrix(self):
        if self._matrix is None:
            self._matrix = build_kernel_matrix(self.spec, self.data.inputs)
        return self._matrix

    @property
    def spectrum(self):
        if self._spectrum is None:
            self._spectrum = eigendecompose(self.matrix)
        return self._spectrum

    @property
    def tables(self):
        if self._tables is None:
            self._tables = build_tables(
                self.spectrum, self.data.n, self.t_max,
                delta=self.cfg.delta, kappa=self.spec.kappa,
            )
        return self._tables

    @property
    def trace(self):
        if self._trace is None:
            self._trace = run_kgd(
                self.matrix, self.data.outputs, self.kgd_config,
                sigma_max=float(self.spectrum.eigenvalues[0]),
            )
        return self._trace

    @property
    def noise_estimate(self) -> float:
        if self._noise_est is None:
            self._noise_est = selectors.estimate_noise_std(
                self.data.outputs, self.data.inputs
            )
        return self._noise_est

    @property
    def tuning(self):
        """70/30 tuning split used by the rules whose constant the
        comparison protocol selects by validation."""
        if self._tuning is None:
            self._tuning = _TuningKit(self)
        return self._tuning

    def model_at(self, t: int) -> FittedModel:
        return FittedModel(
            spec=self.spec,
            train_inputs=self.data.inputs,
            coefficients=self.trace.coefficients[t].copy(),
        )


class _TuningKit:
    def __init__(self, ctx: _TrialContext):
        rng = rng_for(ctx.seed, "tuning-split")
        n = ctx.data.n
        perm = rng.permutation(n)
        n_tr = max(1, min(n - 1, int(round(0.7 * n))))
        self.tr_idx, self.val_idx = perm[:n_tr], perm[n_tr:]
        self.x_tr = ctx.data.inputs[self.tr_idx]
        self.y_tr = ctx.data.outputs[self.tr_idx]
        self.x_val = ctx.data.inputs[self.val_idx]
        self.y_val = ctx.data.outputs[self.val_idx]
        self.n_tr = n_tr
        self.matrix = build_kernel_matrix(ctx.spec, self.x_tr)
        self.spectrum = eigendecompose(self.matrix)
        self.tables = build_tables(
            self.spectrum, n_tr, ctx.t_max, delta=ctx.cfg.delta,
            kappa=ctx.spec.kappa,
        )
        self.trace = run_kgd(
            self.matrix, self.y_tr, KgdConfig(ctx.beta, ctx.t_max),
            sigma_max=float(self.spectrum.eigenvalues[0]),
        )
        preds = self.trace.coefficients @ cross_kernel_matrix(
            ctx.spec, self.x_tr, self.x_val
        )
        self.val_mse = np.mean((preds - self.y_val[None, :]) ** 2, axis=1)
        self.noise_estimate = selectors.estimate_noise_std(self.y_tr, self.x_tr)
        self._bp_norms = None

    @property
    def bp_norms(self):
        if self._bp_norms is None:
            self._bp_norms = selectors.pairwise_pred_norms(
                self.trace, self.trace.t_max
            )
        return self._bp_norms

    def tune(self, t_of_constant) -> float:
        """Pick the grid constant whose selected iterate minimizes the
        validation MSE (ties to the larger constant)."""
        best_c, best_mse = None, math.inf
        for c in _TUNE_GRID:
            t = t_of_constant(float(c))
            mse = float(self.val_mse[t])
            if mse < best_mse:
                best_c, best_mse = float(c), mse
        return best_c


def _constant_for(cfg: ExperimentConfig, method: str, default: float) -> float | None:
    """Fixed constant from config, or None meaning 'tune by validation'."""
    spec = cfg.constants.get(method)
    if spec is None:
        return default
    if isinstance(spec, (int, float)):
        return float(spec)
    if spec == "tuned":
        return None
    raise ConfigError([f"constants[{method!r}] must be a number or 'tuned'"])


def _run_method(ctx: _TrialContext, method: str) -> SelectionResult:
    cfg = ctx.cfg

    if method == "bs":
        if ctx.data.clean_targets is None:
            raise UnsupportedOperationError("baseline needs clean targets")
        result = selectors.baseline_select(
            ctx.trace.train_predictions, ctx.data.clean_targets
        )
        result.model = ctx.model_at(result.t_selected)
        return result

    if method == "ho":
        return selectors.holdout_select(ctx.data, ctx.spec, ctx.kgd_config, ctx.seed)

    if method == "hss":
        L = max(2, int(round(cfg.hss_subsample_fraction * ctx.data.n)))
        grid = np.asarray(cfg.hss_grid, dtype=np.float64) if cfg.hss_grid else None
        return selectors.hybrid_select(
            ctx.data, ctx.spec, ctx.kgd_config,
            grid=grid,
            subsample=L,
            split_ratio=cfg.hss_split_ratio,
            delta=cfg.delta,
            seed=ctx.seed,
            horizon_policy=cfg.hss_horizon_policy,
            tuning_splits=cfg.hss_tuning_splits,
            refine_interval=cfg.hss_refine_interval,
            full_matrix=ctx.matrix,
            full_spectrum=ctx.spectrum,
            full_tables=ctx.tables,
            full_trace=ctx.trace,
        )

    if method == "bsp":
        constant = _constant_for(cfg, "bsp", 1.0)
        if constant is None:
            kit = ctx.tuning
            scan = selectors.BackwardScan(kit.trace, kit.tables, ctx.t_max)
            constant = kit.tune(lambda c: scan.t_hat(c)[0])
        result = selectors.bsp_select(ctx.trace, ctx.tables, constant, ctx.t_max)
        result.model = ctx.model_at(result.t_selected)
        return result

    if method == "bp":
        constant = _constant_for(cfg, "bp", None)
        if constant is None:
            kit = ctx.tuning
            norms = kit.bp_norms
            constant = kit.tune(
                lambda c: selectors.bp_select(
                    kit.trace, kit.tables, c, cfg.delta, norms=norms
                ).t_selected
            )
        result = selectors.bp_select(ctx.trace, ctx.tables, constant, cfg.delta)
        result.model = ctx.model_at(result.t_selected)
        return result

    if method == "lp":
        constant = _constant_for(cfg, "lp", None)
        if constant is None:
            kit = ctx.tuning
            constant = kit.tune(
                lambda c: selectors.lp_select(
                    kit.trace, kit.tables, kit.matrix, c,
                    q=cfg.lp_q, delta=cfg.delta, kappa=ctx.spec.kappa,
                ).t_selected
            )
        result = selectors.lp_select(
            ctx.trace, ctx.tables, ctx.matrix, constant,
            q=cfg.lp_q, delta=cfg.delta, kappa=ctx.spec.kappa,
        )
        result.model = ctx.model_at(result.t_selected)
        return result

    if method == "esr":
        constant = _constant_for(cfg, "esr", 2.0 * math.e)
        if constant is None:
            kit = ctx.tuning
            constant = kit.tune(
                lambda c: selectors.esr_select(
                    kit.spectrum, kit.n_tr, ctx.beta, kit.noise_estimate, c,
                    t_max=ctx.t_max,
                ).t_selected
            )
        result = selectors.esr_select(
            ctx.spectrum, ctx.data.n, ctx.beta, ctx.noise_estimate, constant,
            t_max=ctx.t_max,
        )
        result.model = ctx.model_at(result.t_selected)
        return result

    if method == "dp":
        constant = _constant_for(cfg, "dp", None)
        if constant is None:
            kit = ctx.tuning
            constant = kit.tune(
                lambda c: selectors.dp_select(
                    kit.trace, kit.noise_estimate, c, kit.n_tr
                ).t_selected
            )
        result = selectors.dp_select(
            ctx.trace, ctx.noise_estimate, constant, ctx.data.n
        )
        result.model = ctx.model_at(result.t_selected)
        return result

    if method in ("aic", "bic"):
        constant = _constant_for(cfg, method, 1.0)
        fn = selectors.aic_select if method == "aic" else selectors.bic_select
        if constant is None:
            kit = ctx.tuning
            constant = kit.tune(
                lambda c: fn(kit.trace, kit.tables, c, kit.n_tr).t_selected
            )
        result = fn(ctx.trace, ctx.tables, constant, ctx.data.n)
        result.model = ctx.model_at(result.t_selected)
        return result

    raise ConfigError([f"unknown method {method!r}"])


def _measure(fn):
    tracemalloc.start()
    t0 = time.perf_counter()
    try:
        out = fn()
    finally:
        wall = time.perf_counter() - t0
        _, peak = tracemalloc.get_traced_memory()
        tracemalloc.stop()
    return out, wall, peak / 1e6


def _trial_rows(cfg: ExperimentConfig, d: int, n: int, trial: int) -> list[ResultRow]:
    seed = cfg.seed + trial
    target = "g1" if d == 1 else "g2"
    data = gen_dataset(target, n, cfg.noise_std, seed)
    test = gen_shifted_testset(
        target, cfg.test_size, ShiftConfig(b=1.0, kde_bandwidth=cfg.kde_bandwidth),
        seed,
    )
    spec = kernel_spec_for_dim(d)
    ctx = _TrialContext(cfg, data, spec, cfg.beta_for(d), cfg.t_max_for(n), seed)
    rows = []
    for method in cfg.methods:
        (result, report), wall, peak = _measure(
            lambda m=method: _evaluate_method(ctx, m, test)
        )
        rows.append(ResultRow(
            method=method, d=d, n=n, trial=trial, seed=seed,
            t_selected=result.t_selected,
            constant_used=result.constant_used,
            l2=report.l2, linf=report.linf,
            wall_time_s=wall, peak_mem_mb=peak,
        ))
    return rows


def _evaluate_method(ctx: _TrialContext, method: str, test: Dataset):
    result = _run_method(ctx, method)
    preds = result.model.predict(test.inputs)
    report = test_errors(preds, test.clean_targets)
    return result, report


def _sim2_worker(args):
    cfg_dict, d, n, trial = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    return _trial_rows(cfg, d, n, trial)


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

@dataclass
class ExperimentOutput:
    rows: list
    summary: list
    curves: dict = field(default_factory=dict)


def _summarize(rows: list[ResultRow]) -> list[dict]:
    keys = sorted({(r.method, r.d, r.n) for r in rows})
    out = []
    for method, d, n in keys:
        sub = [r for r in rows if (r.method, r.d, r.n) == (method, d, n)]
        l2 = np.array([r.l2 for r in sub])
        linf = np.array([r.linf for r in sub])
        ts = np.array([r.t_selected for r in sub], dtype=np.float64)
        out.append({
            "method": method, "d": d, "n": n, "trials": len(sub),
            "l2_mean": float(l2.mean()), "l2_std": float(l2.std(ddof=0)),
            "linf_mean": float(linf.mean()), "linf_std": float(linf.std(ddof=0)),
            "t_mean": float(ts.mean()), "t_std": float(ts.std(ddof=0)),
            "wall_time_mean_s": float(np.mean([r.wall_time_s for r in sub])),
            "peak_mem_mean_mb": float(np.mean([r.peak_mem_mb for r in sub])),
        })
    return out


def run_method_comparison(cfg: ExperimentConfig) -> ExperimentOutput:
    jobs = [
        (d, n, trial)
        for d in cfg.dims for n in cfg.sizes for trial in range(cfg.trials)
    ]
    rows: list[ResultRow] = []
    if cfg.workers > 1:
        cfg_dict = _config_as_dict(cfg)
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for chunk in pool.map(
                _sim2_worker, [(cfg_dict, d, n, t) for d, n, t in jobs]
            ):
                rows.extend(chunk)
    else:
        for d, n, trial in jobs:
            rows.extend(_trial_rows(cfg, d, n, trial))
    rows.sort(key=lambda r: (r.method, r.d, r.n, r.trial))
    return ExperimentOutput(rows=rows, summary=_summarize(rows))


def default_sweep_constants() -> np.ndarray:
    dense = np.arange(0.05, 8.0 + 1e-9, 0.05)
    extra = np.array([16.0, 64.0, 256.0, 1e12])
    return np.concatenate([[0.0], dense, extra])


def run_constant_sweep(cfg: ExperimentConfig) -> ExperimentOutput:
    """Per-constant backward-selection results averaged over trials."""
    d, n = cfg.dims[0], cfg.sizes[0]
    target = "g1" if d == 1 else "g2"
    spec = kernel_spec_for_dim(d)
    t_max = cfg.t_max_for(n)
    constants = (
        np.asarray(cfg.sweep_constants, dtype=np.float64)
        if cfg.sweep_constants is not None
        else default_sweep_constants()
    )
    acc_t = np.zeros(constants.size)
    acc_hit = np.zeros(constants.size)
    acc_l2 = np.zeros(constants.size)
    acc_linf = np.zeros(constants.size)
    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        data = gen_dataset(target, n, cfg.noise_std, seed)
        test = gen_shifted_testset(target, cfg.test_size, ShiftConfig(b=1.0), seed)
        ctx = _TrialContext(cfg, data, spec, cfg.beta_for(d), t_max, seed)
        scan = selectors.BackwardScan(ctx.trace, ctx.tables, t_max)
        test_preds = ctx.trace.coefficients @ cross_kernel_matrix(
            spec, data.inputs, test.inputs
        )
        ts, hits = scan.t_hat_many(constants)
        errs = {}
        for i, (t, hit) in enumerate(zip(ts, hits)):
            if t not in errs:
                errs[t] = test_errors(test_preds[t], test.clean_targets)
            acc_t[i] += t
            acc_hit[i] += float(hit)
            acc_l2[i] += errs[t].l2
            acc_linf[i] += errs[t].linf
    sweep_rows = [
        {
            "constant": float(c),
            "t_selected": acc_t[i] / cfg.trials,
            "hit_horizon": acc_hit[i] / cfg.trials,
            "l2": acc_l2[i] / cfg.trials,
            "linf": acc_linf[i] / cfg.trials,
        }
        for i, c in enumerate(constants)
    ]
    return ExperimentOutput(rows=[], summary=[], curves={"sweep": sweep_rows})


def run_covariate_shift(cfg: ExperimentConfig) -> ExperimentOutput:
    """Train once per trial, evaluate on test sets of widening support."""
    d, n = cfg.dims[0], cfg.sizes[0]
    if d != 1:
        raise ConfigError(["covariate shift study is defined for d = 1"])
    target = "g1"
    spec = kernel_spec_for_dim(d)
    t_max = cfg.t_max_for(n)
    b_levels = [1.0] + [float(b) for b in cfg.shift_b_values]
    rows: list[ResultRow] = []
    shift_rows: list[dict] = []
    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        data = gen_dataset(target, n, cfg.noise_std, seed)
        ctx = _TrialContext(cfg, data, spec, cfg.beta_for(d), t_max, seed)
        models: dict[str, tuple[SelectionResult, float, float]] = {}
        for method in cfg.methods:
            (result, _), wall, peak = _measure(
                lambda m=method: (_run_method(ctx, m), None)
            )
            models[method] = (result, wall, peak)
        base_err: dict[str, tuple[float, float]] = {}
        for b in b_levels:
            test = gen_shifted_testset(
                target, cfg.test_size,
                ShiftConfig(
                    b=b, kde_bandwidth=cfg.kde_bandwidth,
                    quadrature_order=cfg.quadrature_order,
                ),
                seed,
            )
            kl = kl_divergence(
                data.inputs[:, 0], test.inputs[:, 0],
                ShiftConfig(
                    b=max(b, 1.0), kde_bandwidth=cfg.kde_bandwidth,
                    quadrature_order=cfg.quadrature_order,
                ),
            )
            for method, (result, wall, peak) in models.items():
                report = test_errors(
                    result.model.predict(test.inputs), test.clean_targets
                )
                if b == 1.0:
                    base_err[method] = (report.l2, report.linf)
                    rows.append(ResultRow(
                        method=method, d=d, n=n, trial=trial, seed=seed,
                        t_selected=result.t_selected,
                        constant_used=result.constant_used,
                        l2=report.l2, linf=report.linf,
                        wall_time_s=wall, peak_mem_mb=peak,
                    ))
                l2_0, linf_0 = base_err[method]
                shift_rows.append({
                    "method": method, "b": b, "kl_divergence": kl, "trial": trial,
                    "l2": report.l2, "linf": report.linf,
                    "delta_l2_pct": 100.0 * (report.l2 - l2_0) / l2_0,
                    "delta_linf_pct": 100.0 * (report.linf - linf_0) / linf_0,
                })
    rows.sort(key=lambda r: (r.method, r.d, r.n, r.trial))
    return ExperimentOutput(
        rows=rows, summary=_summarize(rows), curves={"shift": shift_rows}
    )


def run_realdata(cfg: ExperimentConfig) -> ExperimentOutput:
    train_full = load_geomagnetic_csv(cfg.train_csv, cfg.value_column)
    test_raw = load_geomagnetic_csv(cfg.test_csv, cfg.value_column)
    # express the test coordinates in the training file's affine frame
    test_inputs = normalize_like(denormalize(test_raw), train_full)
    sigma = (
        cfg.realdata_sigma
        if cfg.realdata_sigma is not None
        else (500.0 if cfg.value_column == "total_intensity" else 20.0)
    )
    beta = (
        cfg.realdata_beta
        if cfg.realdata_beta is not None
        else (45.0 if cfg.value_column == "total_intensity" else 20.0)
    )
    spec = KernelSpec(family="wendland_3d", dimension=3)
    rows: list[ResultRow] = []
    geo_preds: dict[str, np.ndarray] = {}
    for trial in range(cfg.trials):
        seed = cfg.seed + trial
        base = train_full
        if cfg.realdata_subsample and cfg.realdata_subsample < base.n:
            idx = rng_for(seed, "realdata-subsample").permutation(base.n)[
                : cfg.realdata_subsample
            ]
            base = Dataset(
                inputs=base.inputs[idx], outputs=base.outputs[idx],
                clean_targets=base.clean_targets[idx], meta=base.meta,
            )
        noisy = add_truncated_gaussian_noise(
            base, sigma, cfg.realdata_truncation, seed
        )
        n = noisy.n
        t_max = cfg.t_max_for(n)
        ctx = _TrialContext(cfg, noisy, spec, beta, t_max, seed)
        for method in cfg.methods:
            (res, rep, preds), wall, peak = _measure(
                lambda m=method: _evaluate_real(ctx, m, test_inputs, test_raw.outputs)
            )
            rows.append(ResultRow(
                method=method, d=3, n=n, trial=trial, seed=seed,
                t_selected=res.t_selected, constant_used=res.constant_used,
                l2=rep.l2, linf=rep.linf, wall_time_s=wall, peak_mem_mb=peak,
            ))
            if trial == 0:
                geo_preds[method] = preds
    rows.sort(key=lambda r: (r.method, r.d, r.n, r.trial))
    raw_coords = denormalize(test_raw)
    geo_rows = []
    for i in range(test_raw.n):
        row = {
            "phi": raw_coords[i, 0], "theta": raw_coords[i, 1],
            "truth": test_raw.outputs[i],
        }
        for method, preds in geo_preds.items():
            row[method] = preds[i]
        geo_rows.append(row)
    return ExperimentOutput(
        rows=rows, summary=_summarize(rows), curves={"geomap": geo_rows}
    )


def _evaluate_real(ctx: _TrialContext, method: str, test_inputs, test_truth):
    result = _run_method(ctx, method)
    preds = result.model.predict(test_inputs)
    report = test_errors(preds, test_truth)
    return result, report, preds


def run_experiment(cfg: ExperimentConfig) -> ExperimentOutput:
    cfg.validate()
    if cfg.experiment == "sim1_constant_sweep":
        return run_constant_sweep(cfg)
    if cfg.experiment == "sim2_method_comparison":
        return run_method_comparison(cfg)
    if cfg.experiment == "sim3_covariate_shift":
        return run_covariate_shift(cfg)
    return run_realdata(cfg)


# ---------------------------------------------------------------------------
# CSV I/O
# ---------------------------------------------------------------------------

def _config_as_dict(cfg: ExperimentConfig) -> dict:
    out = {}
    for name in cfg.__dataclass_fields__:
        value = getattr(cfg, name)
        out[name] = value
    return out


def write_results_csv(rows: list[ResultRow], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(RESULT_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


def read_results_csv(path) -> list[ResultRow]:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise ConfigError(
                [f"results csv header mismatch: {reader.fieldnames}"]
            )
        for rec in reader:
            rows.append(ResultRow(
                method=rec["method"], d=int(rec["d"]), n=int(rec["n"]),
                trial=int(rec["trial"]), seed=int(rec["seed"]),
                t_selected=int(rec["t_selected"]),
                constant_used=(
                    None if rec["constant_used"] == "" else float(rec["constant_used"])
                ),
                l2=float(rec["l2"]), linf=float(rec["linf"]),
                wall_time_s=float(rec["wall_time_s"]),
                peak_mem_mb=float(rec["peak_mem_mb"]),
            ))
    return rows


def write_summary_csv(summary: list[dict], path) -> None:
    if not summary:
        cols = ["method", "d", "n", "trials"]
    else:
        cols = list(summary[0].keys())
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=cols)
        writer.writeheader()
        for row in summary:
            writer.writerow({k: _fmt(v) for k, v in row.items()})


def write_dict_rows_csv(rows: list[dict], columns, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(columns))
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt(row.get(k)) for k in columns})


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.10g}"
    return v


def write_output(out: ExperimentOutput, out_dir) -> list[Path]:
    """Write results/summary plus any named curve files; returns paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    results = out_dir / "results.csv"
    write_results_csv(out.rows, results)
    written.append(results)
    summary = out_dir / "summary.csv"
    write_summary_csv(out.summary, summary)
    written.append(summary)
    curve_columns = {
        "sweep": SWEEP_COLUMNS,
        "shift": SHIFT_COLUMNS,
        "bias_variance": ("t", "bias", "variance", "total"),
    }
    for name, rows in out.curves.items():
        path = out_dir / f"curves_{name}.csv"
        if name == "geomap":
            cols = list(rows[0].keys()) if rows else ["phi", "theta", "truth"]
            write_dict_rows_csv(rows, cols, out_dir / "geo_predictions.csv")
            written.append(out_dir / "geo_predictions.csv")
            continue
        write_dict_rows_csv(rows, curve_columns.get(name, rows[0].keys()), path)
        written.append(path)
    return written


def dump_spectral_tables(cfg: ExperimentConfig, out_dir) -> Path:
    """Build the spectral tables for the configured setting and dump them."""
    d, n = cfg.dims[0], cfg.sizes[0]
    target = "g1" if d == 1 else "g2"
    data = gen_dataset(target, n, cfg.noise_std, cfg.seed)
    spec = kernel_spec_for_dim(d)
    matrix = build_kernel_matrix(spec, data.inputs)
    spectrum = eigendecompose(matrix)
    tables = build_tables(
        spectrum, n, cfg.t_max_for(n), delta=cfg.delta, kappa=spec.kappa
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "spectral_tables.csv"
    tables_to_csv(tables, path)
    return path


def bias_variance_experiment(cfg: ExperimentConfig, out_dir) -> Path:
    """Bias/variance decomposition curves for the configured setting."""
    d, n = cfg.dims[0], cfg.sizes[0]
    target = "g1" if d == 1 else "g2"
    data = gen_dataset(target, n, cfg.noise_std, cfg.seed)
    test = gen_shifted_testset(target, cfg.test_size, ShiftConfig(b=1.0), cfg.seed)
    spec = kernel_spec_for_dim(d)
    curves = bias_variance_curves(
        data, spec, KgdConfig(cfg.beta_for(d), cfg.t_max_for(n)), test.inputs
    )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "curves_bias_variance.csv"
    curves_to_csv(curves, path)
    return path
