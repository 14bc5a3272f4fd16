import sys

import pytest

from cpnkit.gscm import build_gscm_net, scaled_gscm_net
from cpnkit.statespace import explore

sys.setrecursionlimit(max(sys.getrecursionlimit(), 20000))


@pytest.fixture(scope="session")
def gscm_net():
    return build_gscm_net()


@pytest.fixture(scope="session")
def scaled_net():
    return scaled_gscm_net()


@pytest.fixture(scope="session")
def scaled_graph(scaled_net):
    return explore(scaled_net)
