import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=200, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

TAU_14D = 14 / 365


@pytest.fixture
def v3_ref():
    from ilhedge import PositionSpec
    return PositionSpec.v3(1e6, 2000.0, 1500.0, 2500.0)


@pytest.fixture
def v2_ref():
    from ilhedge import PositionSpec
    return PositionSpec.v2(1e6, 2000.0)
