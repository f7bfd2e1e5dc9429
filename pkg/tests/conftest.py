from fractions import Fraction

import pytest

from qmunu.qdist import ModelParams
from qmunu.utils.config import apply_overrides, load_config


@pytest.fixture
def exact_params():
    """A rational triple used across the exact checks."""
    return ModelParams(Fraction(1, 2), Fraction(2, 5), Fraction(1, 10))


@pytest.fixture
def float_params():
    return ModelParams(0.5, 0.4, 0.1)


@pytest.fixture
def near_one_params():
    """q close to 1, where (mu;q)_inf underflows to 0.0 in double precision."""
    return ModelParams(0.999, 0.99, 0.0)


@pytest.fixture
def settings(tmp_path):
    """Root configuration with a small run size and output in a temp dir."""
    config = load_config()
    return apply_overrides(
        config,
        {"output_dir": str(tmp_path), "replicas": 2000, "block_size": 500, "max_workers": 2},
    )
