import numpy as np
import pytest

from src.numerics.tensor import get_default_dtype, set_default_dtype


@pytest.fixture
def f64():
    """Run a test with 64-bit tensors by default."""
    prev = get_default_dtype()
    set_default_dtype(np.float64)
    yield
    set_default_dtype(prev)
