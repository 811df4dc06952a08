"""Renderers turning the runner's CSV outputs into figure files.

Strictly consumers of the CSV contract: no numeric recomputation
happens here beyond grouping and averaging for display. Output files
carry no timestamps, so identical inputs give identical bytes.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import FIGURE_KINDS, read_rows

# neutral PNG metadata so repeated renders are byte-stable
_PNG_METADATA = {"Software": "figure-scripts"}


@dataclass(frozen=True)
class FigureSpec:
    figure_kind: str
    input_csvs: tuple
    output_path: str

    def __post_init__(self):
        if self.figure_kind not in FIGURE_KINDS:
            raise ValueError(
                f"unknown figure kind {self.figure_kind!r}; valid: {FIGURE_KINDS}"
            )
        if not self.input_csvs:
            raise ValueError("at least one input CSV is required")


def _save(fig, path):
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    kwargs = {"dpi": 130}
    if out.suffix.lower() == ".png":
        kwargs["metadata"] = _PNG_METADATA
    elif out.suffix.lower() == ".svg":
        kwargs["metadata"] = {"Date": None}
    fig.savefig(out, **kwargs)
    plt.close(fig)


def render_bias_variance(rows, out_path):
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        t = np.array([r["t"] for r in rows])
        for key, style in (("bias", "-"), ("variance", "--"), ("total", "-.")):
            ax.plot(t, [r[key] for r in rows], style, label=key)
        total = np.array([r["total"] for r in rows])
        i = int(np.argmin(total))
        ax.axvline(t[i], color="gray", lw=0.8)
        ax.annotate(f"min at t={int(t[i])}", (t[i], total[i]),
                    textcoords="offset points", xytext=(5, 5), fontsize=8)
        ax.legend()
    ax.set_xlabel("iteration t")
    ax.set_ylabel("test L2 error")
    ax.set_title("bias / variance decomposition")
    _save(fig, out_path)


def render_constant_sweep(rows, out_path):
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        rows = sorted(rows, key=lambda r: r["constant"])
        c = np.array([r["constant"] for r in rows])
        for key, style in (("l2", "-o"), ("linf", "-s")):
            vals = np.array([r[key] for r in rows])
            ax.plot(c, vals, style, ms=2.5, label=key)
            i = int(np.argmin(vals))
            ax.plot(c[i], vals[i], "r*", ms=10)
        ax.set_xscale("symlog", linthresh=1e-3)
        ax.legend()
    ax.set_xlabel("selection constant")
    ax.set_ylabel("test error")
    ax.set_title("error vs selection constant")
    _save(fig, out_path)


def render_method_bars(rows, out_path):
    fig, ax = plt.subplots(figsize=(7, 4))
    if rows:
        labels = [f"{r['method']} (d={int(r['d'])}, n={int(r['n'])})" for r in rows]
        x = np.arange(len(rows))
        width = 0.38
        ax.bar(x - width / 2, [r["l2_mean"] for r in rows], width, label="L2")
        ax.bar(x + width / 2, [r["linf_mean"] for r in rows], width, label="Linf")
        ax.set_xticks(x)
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=7)
        ax.legend()
    ax.set_ylabel("mean test error")
    ax.set_title("method comparison")
    fig.tight_layout()
    _save(fig, out_path)


def render_shift_boxplot(rows, out_path):
    fig, ax = plt.subplots(figsize=(7, 4))
    if rows:
        methods = sorted({r["method"] for r in rows})
        levels = sorted({r["b"] for r in rows})
        width = 0.8 / max(len(methods), 1)
        for j, method in enumerate(methods):
            data, positions = [], []
            for i, b in enumerate(levels):
                vals = [
                    r["linf"] for r in rows
                    if r["method"] == method and r["b"] == b
                ]
                if vals:
                    data.append(vals)
                    positions.append(i + (j - (len(methods) - 1) / 2) * width)
            bp = ax.boxplot(
                data, positions=positions, widths=width * 0.9,
                patch_artist=True, manage_ticks=False,
            )
            color = plt.cm.tab10(j)
            for box in bp["boxes"]:
                box.set_facecolor(color)
                box.set_alpha(0.6)
            ax.plot([], [], color=color, label=method)
        ax.set_xticks(range(len(levels)))
        ax.set_xticklabels([f"b={b:g}" for b in levels])
        ax.legend()
    ax.set_xlabel("test support endpoint")
    ax.set_ylabel("Linf error")
    ax.set_title("errors under covariate shift")
    _save(fig, out_path)


def render_geo_map(rows, out_path):
    fixed = {"phi", "theta", "truth"}
    value_cols = ["truth"]
    if rows:
        value_cols += sorted(set(rows[0]) - fixed - {"h"})
    fig, axes = plt.subplots(
        len(value_cols), 1, figsize=(7, 3 * len(value_cols)), squeeze=False,
    )
    for ax, col in zip(axes[:, 0], value_cols):
        if rows:
            theta = [r["theta"] for r in rows]
            phi = [r["phi"] for r in rows]
            vals = [r[col] for r in rows]
            sc = ax.scatter(theta, phi, c=vals, s=4, cmap="viridis")
            fig.colorbar(sc, ax=ax, shrink=0.85)
        ax.set_title(col)
        ax.set_xlabel("longitude")
        ax.set_ylabel("latitude")
    fig.tight_layout()
    _save(fig, out_path)


_RENDERERS = {
    "bias_variance": render_bias_variance,
    "constant_sweep": render_constant_sweep,
    "method_bars": render_method_bars,
    "shift_boxplot": render_shift_boxplot,
    "geo_map": render_geo_map,
}


def render(spec: FigureSpec) -> Path:
    """Validate the inputs against the kind's schema and draw the figure."""
    rows = []
    for path in spec.input_csvs:
        rows.extend(read_rows(path, spec.figure_kind))
    _RENDERERS[spec.figure_kind](rows, spec.output_path)
    return Path(spec.output_path)
