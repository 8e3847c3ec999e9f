import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def random_dictionary(rng, K, spread=1.0):
    """Unit-column dictionary near the identity (spread=0) or fully random (spread=1)."""
    a = np.eye(K) + spread * rng.standard_normal((K, K))
    return a / np.linalg.norm(a, axis=0)
