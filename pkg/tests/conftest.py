import datetime as dt
import math

import numpy as np
import pytest

from newsfame.distributions import LogNormalFit
from newsfame.hmm import HmmModel
from newsfame.series import FrequencySeries

START = dt.date(2005, 1, 1)


def make_series(values, entity_id="e", start=START):
    return FrequencySeries(entity_id, start, np.asarray(values, dtype=float))


def make_model(beta=0.01, gamma=0.2, normal_median=3.0, normal_sigma=0.35,
               height_median=22.0, height_sigma=0.4,
               rise_median=1.25, rise_sigma=0.25):
    """Two-state generator whose pulse-exit rule yields mean pulse length
    close to 1/gamma at the defaults (calibrated once, reused everywhere)."""
    return HmmModel(
        beta, gamma,
        LogNormalFit(math.log(normal_median), normal_sigma, sample_size=1000),
        LogNormalFit(math.log(height_median), height_sigma, sample_size=1000),
        LogNormalFit(math.log(rise_median), rise_sigma, sample_size=1000),
    )


@pytest.fixture
def canonical_model():
    return make_model()
