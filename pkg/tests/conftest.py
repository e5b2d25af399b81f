import itertools

import numpy as np
import pytest


def naive_elementary_symmetric(k, values):
    """Brute-force subset enumeration oracle, usable for n <= 8."""
    values = list(values)
    if k == 0:
        return 1.0
    total = 0.0
    for combo in itertools.combinations(values, k):
        prod = 1.0
        for x in combo:
            prod *= x
        total += prod
    return total


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
