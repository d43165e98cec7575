import numpy as np
import pytest

from evshield.nncore import available_backends, backend, layers


@pytest.fixture(params=available_backends())
def kernel_backend(request, monkeypatch):
    """Run the test once per importable kernel backend."""
    monkeypatch.setattr(layers, "kernels", backend.get_kernels(request.param))
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
