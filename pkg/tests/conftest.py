import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from wentzel.spectral import assemble, gen_mesh

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def disk240():
    return gen_mesh("disk", 240, grade=2)


@pytest.fixture(scope="session")
def disk240_asm(disk240):
    return assemble(disk240)


@pytest.fixture(scope="session")
def coarse_disk():
    return gen_mesh("disk", 64)


@pytest.fixture(scope="session")
def coarse_disk_asm(coarse_disk):
    return assemble(coarse_disk)


@pytest.fixture(scope="session")
def square64():
    return gen_mesh("square", 64)


def circle_points(n, radius=1.0):
    t = 2 * np.pi * np.arange(n) / n
    return radius * np.c_[np.cos(t), np.sin(t)]
