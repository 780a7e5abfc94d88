import numpy as np
import pytest

from paracalc import SpectralField, TorusGrid
from paracalc.grid import hermitian_conjugate
from paracalc.spectral import default_partition


@pytest.fixture(scope="session")
def grid1d():
    return TorusGrid(1, 256)


@pytest.fixture(scope="session")
def grid2d():
    return TorusGrid(2, 32)


@pytest.fixture(scope="session")
def part1d(grid1d):
    return default_partition(grid1d)


@pytest.fixture(scope="session")
def part2d(grid2d):
    return default_partition(grid2d)


def rough_field(grid, alpha, seed, channels=1):
    """Random real field whose dyadic blocks decay roughly like 2^(-j alpha)."""
    rng = np.random.default_rng(seed)
    r = grid.k_abs()
    mag = np.zeros(grid.shape)
    nz = r > 0
    mag[nz] = r[nz] ** (-(grid.dim / 2.0 + alpha))
    z = rng.standard_normal((channels,) + grid.shape) \
        + 1j * rng.standard_normal((channels,) + grid.shape)
    c = mag * z
    c = 0.5 * (c + hermitian_conjugate(c, grid.dim))
    return SpectralField(grid, c)
