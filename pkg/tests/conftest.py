import numpy as np
import pytest

from marangoni.design import design_profile
from marangoni.modes import build_mode_basis
from marangoni.params import FluidParams


@pytest.fixture(scope="session")
def design_1235():
    """The four-mode desk-scale design used across spectral/design tests."""
    return design_profile([1, 2, 3, 5], kappa=0.05)


@pytest.fixture(scope="session")
def design_123():
    return design_profile([1, 2, 3], kappa=0.05)


@pytest.fixture(scope="session")
def basis_123(design_123):
    params = FluidParams(nu=1e6, D_thermal=1.0, b=design_123.b_c, h=10.0)
    return build_mode_basis(design_123.K_N, params, design_123.profile)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20240817)
