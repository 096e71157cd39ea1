import numpy as np
import pytest

from pufkey.data_io import generate_synthetic
from pufkey.models import CoefficientModel


def make_model(b0=-3.0, bmax=3.0, sigma_noise=None, index=2):
    """An already-equalized coefficient model (mean 0, sigma 1)."""
    return CoefficientModel(index=index, mu_orig=0.0, sigma_orig=1.0,
                            lower_raw=b0, upper_raw=bmax, sigma_noise=sigma_noise)


@pytest.fixture(scope="session")
def small_population():
    """4x4 arrays, mild correlation, genuine measurement noise."""
    return generate_synthetic(num_devices=40, shape=4, correlation_length=2.0,
                              mean_freq=100.0, device_sigma=1.0, noise_sigma=0.05,
                              repeats=4, seed=20260809)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(987654321)
