import numpy as np
import pytest

from lgcp_design import CovStructure, KernelSpec, MeanFunction


@pytest.fixture
def additive_cov():
    return CovStructure(
        "additive",
        KernelSpec("matern32", 0.8, 2.0),
        KernelSpec("sqexp", 1.5, 2.0),
    )


@pytest.fixture
def separable_cov():
    return CovStructure(
        "separable",
        KernelSpec("matern32", 0.8, 1.0),
        KernelSpec("sqexp", 1.5, 2.0),
    )


@pytest.fixture
def concave_mean():
    return MeanFunction.concave_quadratic_time(2.0, 0.5, 30.0)


def random_cov(rng):
    """A random valid covariance structure for property tests."""
    mode = rng.choice(["separable", "additive"])
    sv = 1.0 if mode == "separable" else float(rng.uniform(0.3, 3.0))
    spatial = KernelSpec(
        str(rng.choice(["matern32", "sqexp"])), float(rng.uniform(0.2, 2.0)), sv
    )
    temporal = KernelSpec(
        str(rng.choice(["matern32", "sqexp"])),
        float(rng.uniform(0.2, 2.0)),
        float(rng.uniform(0.3, 3.0)),
    )
    return CovStructure(mode, spatial, temporal)
