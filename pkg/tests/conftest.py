import numpy as np
import pytest

from watermax import _corepy

BACKENDS = [_corepy]
try:
    from watermax import _core
    BACKENDS.append(_core)
except ImportError:
    _core = None


@pytest.fixture(params=[b.BACKEND_NAME for b in BACKENDS], ids=lambda n: n)
def kernel(request):
    """Run a test against each available kernel backend."""
    for b in BACKENDS:
        if b.BACKEND_NAME == request.param:
            return b
    raise RuntimeError(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(0xC0FFEE)
