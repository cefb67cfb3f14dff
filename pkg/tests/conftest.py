import warnings

import numpy as np
import pytest

from wdmtwin.field_sim import NetworkSim
from wdmtwin.grid import ChannelGrid
from wdmtwin.scenario import default_topology
from wdmtwin.topology import parse_topology
from wdmtwin.train import TrainConfig, generate_probes, train_twin

ACCEPTANCE_LINES: list[str] = []


def make_topology(**sim):
    doc = default_topology(**sim)
    doc.pop("trx_truth_csv")  # use the built-in truth curve, no file needed
    return parse_topology(doc)


@pytest.fixture(scope="session")
def grid48():
    return ChannelGrid.uniform()


@pytest.fixture(scope="session")
def sim():
    return NetworkSim(make_topology())


@pytest.fixture(scope="session")
def varied_sim():
    return NetworkSim(make_topology(device_variation=True))


def _train(net_sim):
    cfg = TrainConfig()
    probes = generate_probes(net_sim, "train", cfg)
    link = net_sim.link("train")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model, curve = train_twin(probes, net_sim.grid, link, cfg)
    return model, curve, probes, cfg


@pytest.fixture(scope="session")
def trained(sim):
    """Twin trained with the default configuration: (model, curve, probes, cfg)."""
    return _train(sim)


@pytest.fixture(scope="session")
def trained_varied(varied_sim):
    return _train(varied_sim)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0].split("-")[1])):
            terminalreporter.write_line(line)
