"""Shared fixtures for the igd-sync tests."""
import sys

sys.path.insert(0, 'src')

import numpy as np
import pytest

from objective import QuadraticComponent, problem_summary, random_instance


@pytest.fixture
def toy_problem():
    """f1 = x^2, f2 = x^2 + 2x: L = 4, ell = 2, x* = -0.5."""
    return problem_summary(
        [
            QuadraticComponent.from_matrix(np.array([[1.0]]), np.array([0.0])),
            QuadraticComponent.from_matrix(np.array([[1.0]]), np.array([2.0])),
        ]
    )


@pytest.fixture
def tall_problem():
    """Well-conditioned random instance (tall B_i) with r_max comfortably above 0.05."""
    return random_instance(n=5, N=4, seed=11, rows=40)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
