from dataclasses import replace

import pytest

from power_stage import PlantParams
from pv_model import SOLTECH_215, PVArray, fit_single_diode
from scenario import Scenario, Segment


@pytest.fixture(scope="session")
def panel():
    return fit_single_diode(SOLTECH_215)


@pytest.fixture(scope="session")
def array(panel):
    return PVArray(panel, n_series_panels=7, n_parallel_strings=1)


@pytest.fixture
def short_scenario():
    """Lossless STC scenario at the coarsest admissible averaged step."""
    def make(duration=0.02, **changes):
        sc = Scenario(name="short", schedule=(Segment(duration, 1000.0, 25.0),), plant=PlantParams(),
                      dt=1e-5, decimation=1)
        return replace(sc, **changes)
    return make
