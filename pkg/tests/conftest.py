"""Shared fixtures: the reference fixture solve at two resolutions.

The continuation runs are expensive, so they are computed once per
session and shared between the diagnostics unit tests and the
acceptance suite.
"""

import math

import numpy as np
import pytest

from shockdiff.driver import ContinuationSchedule, continuation_solve
from shockdiff.geometry import WedgeSetup, derive_geometry
from shockdiff.physics import GasModel


def reference_geometry():
    gas = GasModel(2.0, 1.0, 2.0)
    return gas, derive_geometry(WedgeSetup(gas, -math.pi / 2))


def _solve(n):
    gas, geom = reference_geometry()
    schedule = ContinuationSchedule.default(eps0=0.1, n_stages=4,
                                            delta_ratio=0.4)
    return continuation_solve(geom, schedule, n_sigma=n, n_theta=n)


@pytest.fixture(scope="session")
def fixture_states_64():
    """Per-stage states of the reference continuation at 64 x 64."""
    return _solve(64)


@pytest.fixture(scope="session")
def fixture_states_128():
    """Per-stage states of the reference continuation at 128 x 128."""
    return _solve(128)
