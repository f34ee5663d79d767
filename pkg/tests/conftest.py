import os
import sys

import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from universality_lab.conjugacy import koenigs_chart  # noqa: E402
from universality_lab.dynamics import HolomorphicMap  # noqa: E402

settings.register_profile("lab", deadline=None, derandomize=True, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("lab")


@pytest.fixture(scope="session")
def blaschke():
    return HolomorphicMap.blaschke(0.6)


@pytest.fixture(scope="session")
def blaschke_chart(blaschke):
    return koenigs_chart(blaschke, 0j)
