import math

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from vortexbell.lg_fields import BeamSpec, default_grid, lg_field

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

WAIST = 297.6
INV_PI2 = 1.0 / math.pi ** 2

# criterion number -> (passed, detail); filled by tests/test_acceptance.py
ACCEPTANCE = {}


def beam(n=0, m=0):
    return BeamSpec(WAIST, 0.5328, n, m)


def field(n=0, n_pixels=512, extent_waists=8.0, m=0):
    b = beam(n, m)
    return lg_field(b, default_grid(b, n_pixels, extent_waists))


@pytest.fixture(scope="session")
def fields_512():
    return {n: field(n) for n in range(4)}


@pytest.fixture(scope="session")
def fields_128():
    return {n: field(n, 128) for n in range(4)}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {k}: {detail}")


def random_points(rng, size, scale=2.0):
    return tuple(rng.uniform(-scale, scale, size) for _ in range(4))
