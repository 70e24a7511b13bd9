import numpy as np
import pytest

from eqassess import BinGrid, Catalog, Region


@pytest.fixture
def unit_region():
    """1 degree x 1 degree box at the equator."""
    return Region.rectangle(0.0, 1.0, 0.0, 1.0)


@pytest.fixture
def small_catalog():
    times = np.array([0.25, 0.5, 0.75, 1.5, 3.0])
    lons = np.array([0.2, 0.4, 0.6, 0.8, 0.5])
    lats = np.array([0.3, 0.5, 0.7, 0.2, 0.5])
    mags = np.array([4.1, 4.5, 5.2, 4.0, 4.8])
    return Catalog(times, lons, lats, mags, window_days=5.0, m0=4.0)


@pytest.fixture
def two_by_two_grid():
    return BinGrid.regular(
        lon_edges=np.array([0.0, 0.5, 1.0]),
        lat_edges=np.array([0.0, 0.5, 1.0]),
        mag_edges=np.array([4.0, 5.0, 6.0]),
    )
