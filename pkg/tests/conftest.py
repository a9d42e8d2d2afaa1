import numpy as np
import pytest

from specloop.probmodel import Dataset, MeasurementRecord, ModelSpec, PriorDescriptor


def flat_rate_forward(x, theta):
    """Rate model f(x) = lambda, independent of x."""
    theta = np.asarray(theta, dtype=float)
    return theta[..., 0:1] * np.ones_like(x)


def make_flat_model(prior=None) -> ModelSpec:
    return ModelSpec(
        id="flat",
        dim=1,
        prior=(prior or PriorDescriptor.gamma(2.0, 1.0),),
        forward=flat_rate_forward,
        param_names=("lam",),
    )


@pytest.fixture
def flat_model():
    return make_flat_model()


@pytest.fixture
def conjugate_data():
    """Single observation y = 3 at unit exposure: posterior is Gamma(5, 2)."""
    return Dataset([MeasurementRecord(x=0.0, y=3, exposure=1.0)])


def batch_se(values, n_batches=20):
    """Batch-means standard error, robust to chain autocorrelation."""
    values = np.asarray(values, dtype=float)
    n = len(values) // n_batches
    means = values[: n * n_batches].reshape(n_batches, n).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))
