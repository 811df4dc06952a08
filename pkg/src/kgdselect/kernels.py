"""Mercer kernels and Gram matrix construction.

Supported families:

* ``sobolev_min``  K(x, x') = 1 + min(x, x') on [0, 1], d = 1
* ``wendland_3d``  K(x, x') = h(||x - x'||_2) with the compactly supported
  profile h(u) = (1-u)^4 (4u+1) on [0, 1], d = 3
* ``gaussian``     exp(-||x - x'||^2 / (2 w^2)), any d (robustness testing)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel

FAMILIES = ("sobolev_min", "wendland_3d", "gaussian")

# kappa = sqrt(sup_x K(x, x)), an analytic per-family constant
_KAPPA = {"sobolev_min": math.sqrt(2.0), "wendland_3d": 1.0, "gaussian": 1.0}


@dataclass(frozen=True)
class KernelSpec:
    """Identifies a kernel family and input dimension."""

    family: str
    dimension: int
    width: float | None = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown kernel family {self.family!r}")
        if self.dimension < 1:
            raise ValueError("dimension must be a positive integer")
        if self.family == "sobolev_min" and self.dimension != 1:
            raise ValueError("sobolev_min is only defined for dimension 1")
        if self.family == "wendland_3d" and self.dimension != 3:
            raise ValueError("wendland_3d is only defined for dimension 3")
        if self.family == "gaussian":
            if self.width is None or self.width <= 0:
                raise ValueError("gaussian kernel needs width > 0")

    @property
    def kappa(self) -> float:
        return _KAPPA[self.family]


@dataclass(frozen=True)
class KernelMatrix:
    """Symmetric PSD Gram matrix over the training inputs."""

    entries: np.ndarray
    kappa: float
    spec: KernelSpec | None = field(default=None, compare=False)

    @property
    def n(self) -> int:
        return self.entries.shape[0]


def _as_points(x, dimension: int) -> np.ndarray:
    a = np.asarray(x, dtype=np.float64)
    if a.ndim == 1:
        if dimension == 1:
            a = a.reshape(-1, 1)
        elif a.size == dimension:
            a = a.reshape(1, dimension)
    if a.ndim != 2 or a.shape[1] != dimension:
        raise ValueError(
            f"inputs must have shape (n, {dimension}), got {np.asarray(x).shape}"
        )
    return a


def eval_kernel(spec: KernelSpec, x, y) -> float:
    """Evaluate K(x, y) for a single pair of points."""
    xv = np.atleast_1d(np.asarray(x, dtype=np.float64))
    yv = np.atleast_1d(np.asarray(y, dtype=np.float64))
    if xv.shape != (spec.dimension,) or yv.shape != (spec.dimension,):
        raise ValueError(
            f"expected vectors of length {spec.dimension}, got {xv.shape} and {yv.shape}"
        )
    if spec.family == "sobolev_min":
        return float(1.0 + min(xv[0], yv[0]))
    r = float(np.linalg.norm(xv - yv))
    if spec.family == "wendland_3d":
        return float(_accel.wendland_profile_numpy(np.asarray(r)))
    return float(math.exp(-0.5 * (r / spec.width) ** 2))


def build_kernel_matrix(spec: KernelSpec, inputs) -> KernelMatrix:
    """Build the n x n Gram matrix.

    The matrix is exactly symmetric: entries are computed once and
    mirrored, which downstream eigendecomposition relies on.
    """
    X = _as_points(inputs, spec.dimension)
    if X.shape[0] < 1:
        raise ValueError("need at least one input point")
    if spec.family == "sobolev_min":
        K = _accel.sobolev_gram(np.ascontiguousarray(X[:, 0]))
    elif spec.family == "wendland_3d":
        K = _accel.wendland_gram(np.ascontiguousarray(X))
    else:
        K = _accel.gaussian_gram(np.ascontiguousarray(X), spec.width)
    return KernelMatrix(entries=K, kappa=spec.kappa, spec=spec)


def cross_kernel_matrix(spec: KernelSpec, train_inputs, query_inputs) -> np.ndarray:
    """n x m matrix K(x_i, x'_j) between training and query points."""
    X = _as_points(train_inputs, spec.dimension)
    Q = _as_points(query_inputs, spec.dimension)
    if spec.family == "sobolev_min":
        return _accel.sobolev_cross(
            np.ascontiguousarray(X[:, 0]), np.ascontiguousarray(Q[:, 0])
        )
    if spec.family == "wendland_3d":
        return _accel.wendland_cross(np.ascontiguousarray(X), np.ascontiguousarray(Q))
    return _accel.gaussian_cross(
        np.ascontiguousarray(X), np.ascontiguousarray(Q), spec.width
    )
