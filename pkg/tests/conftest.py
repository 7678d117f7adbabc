import pathlib

import numpy as np
import pytest

from gridstate.fileio import load_system_file
from gridstate.loads import Load
from gridstate.machine import MachineParams
from gridstate.network import NetworkParams, Topology
from gridstate.steady_state import OperatingSpec, compute_steady_state
from gridstate.system import assemble

FIXTURE_DIR = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture(scope="session")
def fixture_path():
    return FIXTURE_DIR / "three_bus.json"


@pytest.fixture(scope="session")
def three_bus(fixture_path):
    """Canonical 3-bus / 2-machine / 1-load system and its operating spec."""
    return load_system_file(fixture_path)


@pytest.fixture(scope="session")
def certified(three_bus):
    """Certified steady state of the canonical fixture."""
    sys_, spec = three_bus
    return compute_steady_state(sys_, spec)


def sample_machine(salient=True):
    """Well-conditioned machine constants used across unit tests."""
    if salient:
        return MachineParams(
            m=0.002, d=0.06, r_s=0.08, r_f=0.06, r_d=0.05, r_q=0.05,
            l_s=6e-3, l_sa=4e-4, l_f=0.12, l_d=8e-3, l_q=8e-3, l_fd=4e-3,
            l_sf=2.0e-2, l_sd=1.8e-3, l_sq=1.8e-3)
    return MachineParams(
        m=0.0025, d=0.07, r_s=0.07, r_f=0.05, r_d=0.05, r_q=0.05,
        l_s=5e-3, l_sa=0.0, l_f=0.10, l_d=7e-3, l_q=7e-3, l_fd=3e-3,
        l_sf=1.8e-2, l_sd=1.5e-3, l_sq=1.5e-3)


def slow_two_bus(omega0=5.0, g=0.2, b=0.0):
    """Small low-frequency system: one machine, one loaded bus, one line.

    The low frequency keeps finite-difference truncation far below the
    thresholds the probes are tested against.
    """
    top = Topology(np.array([[1.0], [-1.0]]))
    net = NetworkParams(c=np.array([1e-3, 1e-3]), l_T=np.array([1e-2]),
                        r_T=np.array([0.5]))
    loads = [Load.none(), Load.impedance(g, b)]
    sys_ = assemble([sample_machine(salient=True)], [0], top, net,
                    loads=loads, bus_ids=["gen", "load"])
    spec = OperatingSpec(omega0=omega0, gen_voltage_mag=np.array([10.0]),
                         gen_voltage_angle=np.array([0.0]),
                         sigma=np.array([1]))
    return sys_, spec


class AnisotropicLoad:
    """Test-only non-conforming load: scales the two axes differently, so it
    does not commute with rotations."""

    def __init__(self, ga=1.0, gb=2.0):
        self.ga, self.gb = ga, gb

    def current(self, v):
        return np.array([self.ga * v[0], self.gb * v[1]])
