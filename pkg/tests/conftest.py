import numpy as np
import pytest

from fredft import backend


@pytest.fixture
def rng():
    return np.random.default_rng(42)


@pytest.fixture(params=["numba", "numpy"] if backend.NUMBA_AVAILABLE else ["numpy"])
def both_backends(request):
    """Run a test under each kernel backend."""
    prev = backend.using_numba()
    backend.use_numba(request.param == "numba")
    yield request.param
    backend.use_numba(prev)


def margin_uniform(rng, shape, margin=1e-3, lo=-1.0, hi=1.0):
    """Uniform samples kept away from zero (ReLU/max kinks)."""
    x = rng.uniform(lo, hi, shape)
    small = np.abs(x) < margin
    x[small] += margin * np.where(x[small] >= 0, 1.0, -1.0)
    return x
