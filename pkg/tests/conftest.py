import numpy as np
import pytest

from opacitylab.models import (CoordinationGame, ExtractionModel,
                               ObservationChannel)
from opacitylab.survival import TriggerPolicy


@pytest.fixture
def benchmark_game():
    return CoordinationGame(q=0.4, R=1.0, delta=0.9, w=0.2, horizon_T=10)


@pytest.fixture
def benchmark_channel():
    return ObservationChannel(epsilon=0.04, lam=1.0, lam_min=1.0,
                              lam_max=1e6)


@pytest.fixture
def opaque_channel():
    return ObservationChannel(epsilon=0.04, lam=1e6, lam_min=1.0,
                              lam_max=1e6)


@pytest.fixture
def extraction_model():
    # calibration of the survival-DP preset
    return ExtractionModel(alpha=0.06, x_max=0.6, s_fail=0.2,
                           shock_std=0.05, sigma0=0.15, b_dagger=0.85,
                           s0=0.55)


@pytest.fixture
def trigger_policy():
    return TriggerPolicy(b_dagger=0.85, x_high=0.5, x_low=0.0)


@pytest.fixture
def coarse_grid():
    return np.linspace(0.0, 1.0, 201)
