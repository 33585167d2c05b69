import pytest

from dnls_workbench.random_fields import random_smooth_field
from dnls_workbench.spectral_core import Grid


@pytest.fixture(scope="session")
def grid():
    """Reference box for most tests: [-40, 40) with 4096 nodes."""
    return Grid(40.0, 4096)


@pytest.fixture(scope="session")
def coarse_grid():
    return Grid(40.0, 1024)


@pytest.fixture
def random_field(grid):
    """Factory for seeded smooth complex fields on the reference grid."""

    def make(seed, **kwargs):
        return random_smooth_field(grid, seed, **kwargs)

    return make
