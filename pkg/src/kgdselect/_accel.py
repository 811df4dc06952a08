"""Backend dispatch for the hot numeric kernels.

Two implementations exist for every hot routine: a vectorized pure-numpy
one and a numba ``@njit`` one. The active backend is chosen at import
time from the ``KGDSELECT_BACKEND`` environment variable:

    auto   (default) use numba when importable, else numpy
    numba  require numba, fail loudly if missing
    numpy  force the pure-numpy path

``benchmarks/backend_bench.py`` times both paths side by side.
"""

from __future__ import annotations

import os

import numpy as np

_BACKEND_ENV = "KGDSELECT_BACKEND"

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAS_NUMBA = False

    def njit(*args, **kwargs):
        raise RuntimeError("numba is not available")


def _requested_backend() -> str:
    value = os.environ.get(_BACKEND_ENV, "auto").strip().lower()
    if value not in ("auto", "numba", "numpy"):
        raise ValueError(
            f"{_BACKEND_ENV} must be one of auto|numba|numpy, got {value!r}"
        )
    if value == "numba" and not HAS_NUMBA:
        raise RuntimeError(f"{_BACKEND_ENV}=numba but numba cannot be imported")
    return value


USE_NUMBA = HAS_NUMBA and _requested_backend() != "numpy"


# ---------------------------------------------------------------------------
# pure-numpy implementations
# ---------------------------------------------------------------------------

def sobolev_gram_numpy(x: np.ndarray) -> np.ndarray:
    # 1 + min(x_i, x_j); bitwise symmetric because min is argument-order exact
    return 1.0 + np.minimum.outer(x, x)


def sobolev_cross_numpy(x: np.ndarray, q: np.ndarray) -> np.ndarray:
    return 1.0 + np.minimum.outer(x, q)


def _pairwise_dist_numpy(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def wendland_profile_numpy(r: np.ndarray) -> np.ndarray:
    # (1-r)^4 (4r+1) on [0,1], 0 beyond; continuous with value 1 at r=0
    out = np.where(r <= 1.0, (1.0 - r) ** 4 * (4.0 * r + 1.0), 0.0)
    return out


def wendland_gram_numpy(X: np.ndarray) -> np.ndarray:
    return wendland_profile_numpy(_pairwise_dist_numpy(X, X))


def wendland_cross_numpy(X: np.ndarray, Q: np.ndarray) -> np.ndarray:
    return wendland_profile_numpy(_pairwise_dist_numpy(X, Q))


def gaussian_gram_numpy(X: np.ndarray, width: float) -> np.ndarray:
    d = _pairwise_dist_numpy(X, X)
    return np.exp(-0.5 * (d / width) ** 2)


def gaussian_cross_numpy(X: np.ndarray, Q: np.ndarray, width: float) -> np.ndarray:
    d = _pairwise_dist_numpy(X, Q)
    return np.exp(-0.5 * (d / width) ** 2)


def kgd_iterate_numpy(
    K: np.ndarray,
    y: np.ndarray,
    beta: float,
    t_max: int,
    keep_history: bool,
):
    """Run the gradient-descent recursion in coefficient space.

    Returns ``(coeffs, preds, inc_emp, inc_rkhs, resid_l2)`` where the
    increment norms at index t describe the step from iterate t to t+1
    (one extra internal step is taken so the maps cover t = 0..t_max).
    ``coeffs`` and ``preds`` are None in streaming mode.
    """
    n = y.shape[0]
    s = beta / n
    c = np.zeros(n)
    r = y.astype(np.float64).copy()
    inc_emp = np.empty(t_max + 1)
    inc_rkhs = np.empty(t_max + 1)
    resid = np.empty(t_max + 1)
    coeffs = np.zeros((t_max + 1, n)) if keep_history else None
    preds = np.zeros((t_max + 1, n)) if keep_history else None
    for t in range(t_max + 1):
        resid[t] = np.sqrt(r @ r)
        Kr = K @ r
        rKr = r @ Kr
        inc_rkhs[t] = s * np.sqrt(max(rKr, 0.0))
        inc_emp[t] = s * np.sqrt((Kr @ Kr) / n)
        if keep_history and t < t_max:
            coeffs[t + 1] = coeffs[t] + s * r
            preds[t + 1] = y - (r - s * Kr)
        if t < t_max:
            c = c + s * r
            r = r - s * Kr
    return coeffs, preds, inc_emp, inc_rkhs, resid, c


# ---------------------------------------------------------------------------
# numba implementations
# ---------------------------------------------------------------------------

if HAS_NUMBA:

    @njit(cache=True)
    def sobolev_gram_numba(x):
        n = x.shape[0]
        K = np.empty((n, n))
        for i in range(n):
            for j in range(i, n):
                v = 1.0 + min(x[i], x[j])
                K[i, j] = v
                K[j, i] = v
        return K

    @njit(cache=True)
    def sobolev_cross_numba(x, q):
        n = x.shape[0]
        m = q.shape[0]
        K = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                K[i, j] = 1.0 + min(x[i], q[j])
        return K

    @njit(cache=True)
    def _wendland_value(r):
        if r > 1.0:
            return 0.0
        u = 1.0 - r
        return u * u * u * u * (4.0 * r + 1.0)

    @njit(cache=True)
    def wendland_gram_numba(X):
        n, d = X.shape
        K = np.empty((n, n))
        for i in range(n):
            K[i, i] = 1.0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    s += diff * diff
                v = _wendland_value(np.sqrt(s))
                K[i, j] = v
                K[j, i] = v
        return K

    @njit(cache=True)
    def wendland_cross_numba(X, Q):
        n, d = X.shape
        m = Q.shape[0]
        K = np.empty((n, m))
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - Q[j, k]
                    s += diff * diff
                K[i, j] = _wendland_value(np.sqrt(s))
        return K

    @njit(cache=True)
    def gaussian_gram_numba(X, width):
        n, d = X.shape
        K = np.empty((n, n))
        inv = 0.5 / (width * width)
        for i in range(n):
            K[i, i] = 1.0
            for j in range(i + 1, n):
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - X[j, k]
                    s += diff * diff
                v = np.exp(-s * inv)
                K[i, j] = v
                K[j, i] = v
        return K

    @njit(cache=True)
    def gaussian_cross_numba(X, Q, width):
        n, d = X.shape
        m = Q.shape[0]
        K = np.empty((n, m))
        inv = 0.5 / (width * width)
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = X[i, k] - Q[j, k]
                    s += diff * diff
                K[i, j] = np.exp(-s * inv)
        return K

    @njit(cache=True)
    def kgd_iterate_numba(K, y, beta, t_max, keep_history):
        n = y.shape[0]
        s = beta / n
        c = np.zeros(n)
        r = y.copy()
        inc_emp = np.empty(t_max + 1)
        inc_rkhs = np.empty(t_max + 1)
        resid = np.empty(t_max + 1)
        hist_rows = t_max + 1 if keep_history else 1
        coeffs = np.zeros((hist_rows, n))
        preds = np.zeros((hist_rows, n))
        for t in range(t_max + 1):
            resid[t] = np.sqrt(np.dot(r, r))
            Kr = np.dot(K, r)
            rKr = np.dot(r, Kr)
            if rKr < 0.0:
                rKr = 0.0
            inc_rkhs[t] = s * np.sqrt(rKr)
            inc_emp[t] = s * np.sqrt(np.dot(Kr, Kr) / n)
            if keep_history and t < t_max:
                for i in range(n):
                    coeffs[t + 1, i] = coeffs[t, i] + s * r[i]
                    preds[t + 1, i] = y[i] - (r[i] - s * Kr[i])
            if t < t_max:
                for i in range(n):
                    c[i] = c[i] + s * r[i]
                    r[i] = r[i] - s * Kr[i]
        return coeffs, preds, inc_emp, inc_rkhs, resid, c

else:  # pragma: no cover
    sobolev_gram_numba = None
    sobolev_cross_numba = None
    wendland_gram_numba = None
    wendland_cross_numba = None
    gaussian_gram_numba = None
    gaussian_cross_numba = None
    kgd_iterate_numba = None


# ---------------------------------------------------------------------------
# active aliases
# ---------------------------------------------------------------------------

if USE_NUMBA:
    sobolev_gram = sobolev_gram_numba
    sobolev_cross = sobolev_cross_numba
    wendland_gram = wendland_gram_numba
    wendland_cross = wendland_cross_numba
    gaussian_gram = gaussian_gram_numba
    gaussian_cross = gaussian_cross_numba
    _kgd_iterate_raw = kgd_iterate_numba
else:
    sobolev_gram = sobolev_gram_numpy
    sobolev_cross = sobolev_cross_numpy
    wendland_gram = wendland_gram_numpy
    wendland_cross = wendland_cross_numpy
    gaussian_gram = gaussian_gram_numpy
    gaussian_cross = gaussian_cross_numpy
    _kgd_iterate_raw = kgd_iterate_numpy


def kgd_iterate(K, y, beta, t_max, keep_history=True):
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    coeffs, preds, inc_emp, inc_rkhs, resid, c_last = _kgd_iterate_raw(
        K, y, float(beta), int(t_max), keep_history
    )
    if not keep_history:
        coeffs, preds = None, None
    return coeffs, preds, inc_emp, inc_rkhs, resid, c_last


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
