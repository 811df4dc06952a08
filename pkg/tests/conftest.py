import numpy as np
import pytest

from kgdselect.kernels import KernelMatrix


def random_psd_matrix(rng, n, scale=1.0):
    """Random symmetric PSD matrix built from a square factor."""
    A = rng.normal(0.0, 1.0, (n, n))
    K = A @ A.T * (scale / n)
    return 0.5 * (K + K.T)


def as_kernel_matrix(K, kappa=None):
    if kappa is None:
        kappa = float(np.sqrt(np.max(np.diag(K))))
    return KernelMatrix(entries=K, kappa=kappa)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
