import os
import re

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from morphgen import mesh_io, shapes

settings.register_profile(
    "default",
    max_examples=40,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.function_scoped_fixture],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(re.search(r"C(\d+)", s).group(1))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(20240601))


@pytest.fixture
def cube():
    return shapes.box()


def write_spheres(directory, radii, center=(0.0, 0.0, 0.0), subdivisions=4):
    paths = []
    for i, r in enumerate(radii):
        p = directory / f"sphere_{i}_{r}.stl"
        mesh_io.save_stl(shapes.icosphere(r, center, subdivisions), p)
        paths.append(str(p))
    return paths


@pytest.fixture(scope="session")
def three_spheres(tmp_path_factory):
    """Concentric basis spheres of radius 0.4, 0.5 and 0.6."""
    return write_spheres(tmp_path_factory.mktemp("three_spheres"), (0.4, 0.5, 0.6))


@pytest.fixture(scope="session")
def nested_spheres(tmp_path_factory):
    """Concentric basis spheres of radius 0.5, 0.65 and 0.8 in [-1, 1]^3."""
    return write_spheres(tmp_path_factory.mktemp("nested_spheres"), (0.5, 0.65, 0.8))
