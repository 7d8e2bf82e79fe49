import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

SQ3 = np.sqrt(3.0)


@pytest.fixture
def levy_path():
    """Piecewise-linear (t, x(t)) on [0, 9]: slope sqrt(3), then flat, then sqrt(3)."""
    from sigflow import SampledPath

    t = np.array([0.0, 2.0, 8.0, 9.0])
    x = np.array([0.0, 2 * SQ3, 2 * SQ3, 3 * SQ3])
    return SampledPath(t, np.stack([t, x], axis=1))


def random_path(rng, n_points, dim, scale=1.0):
    from sigflow import SampledPath

    t = np.cumsum(rng.uniform(0.1, 1.0, n_points))
    return SampledPath(t, scale * rng.normal(size=(n_points, dim)))
