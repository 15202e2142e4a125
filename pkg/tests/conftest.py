import numpy as np
import pytest

import tenspine as ts


@pytest.fixture(scope="session")
def desk_model():
    return ts.generate_topology(ts.TopologyParams(n=3, m=6))


@pytest.fixture(scope="session")
def small_model():
    return ts.generate_topology(ts.TopologyParams(n=3, m=3))


@pytest.fixture(scope="session")
def desk_rig(desk_model):
    return ts.form_find(desk_model)


@pytest.fixture(scope="session")
def small_rig(small_model):
    return ts.form_find(small_model)


@pytest.fixture(scope="session")
def desk_geometry(desk_rig):
    return ts.ControlGeometry.from_rig(desk_rig)


def tiny_chain_model(free_at=(1.0, 0.0, 0.0)):
    """Two anchors at x=0 and x=2 with one free node between them."""
    params = ts.TopologyParams(n=3, m=3)
    a0 = ts.NodeId("A", 0, 0)
    a1 = ts.NodeId("A", 1, 0)
    free = ts.NodeId("A", 2, 0)
    nodes = [a0, a1, free]
    coords = np.array([[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], list(free_at)])
    members = [ts.Member("vertical", (a0, free)),
               ts.Member("vertical", (a1, free))]
    return ts.StructureModel(params, nodes, coords, members), (a0, a1, free)
