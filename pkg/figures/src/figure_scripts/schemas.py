"""CSV schemas the renderers consume.

Each figure kind names the columns its input files must carry. The
geo_map kind additionally accepts any number of per-method prediction
columns beyond the fixed ones.
"""

from __future__ import annotations

import csv


class SchemaError(ValueError):
    """Input CSV does not match the expected schema."""

    def __init__(self, path, missing):
        self.path = str(path)
        self.missing = list(missing)
        super().__init__(
            f"{path}: missing required column(s): {', '.join(self.missing)}"
        )


REQUIRED_COLUMNS = {
    "bias_variance": ("t", "bias", "variance", "total"),
    "constant_sweep": ("constant", "t_selected", "hit_horizon", "l2", "linf"),
    "method_bars": ("method", "d", "n", "l2_mean", "linf_mean"),
    "shift_boxplot": ("method", "b", "kl_divergence", "trial", "l2", "linf"),
    "geo_map": ("phi", "theta", "truth"),
}

FIGURE_KINDS = tuple(REQUIRED_COLUMNS)


def read_rows(path, kind: str) -> list[dict]:
    """Parse a CSV after validating it carries the kind's columns.

    Numeric-looking fields are converted to float; everything else is
    kept as text. An empty data section is valid (the renderers draw
    blank axes).
    """
    required = REQUIRED_COLUMNS[kind]
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in required if c not in header]
        if missing:
            raise SchemaError(path, missing)
        rows = []
        for rec in reader:
            parsed = {}
            for key, value in rec.items():
                if key is None:
                    continue
                try:
                    parsed[key] = float(value)
                except (TypeError, ValueError):
                    parsed[key] = value
            rows.append(parsed)
    return rows
