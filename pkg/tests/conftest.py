import numpy as np
import pytest

from qualshape.renderer import RenderSpec
from qualshape.surfacegen import GridSpec, make_sigmoidal_bump

RESULTS: list[str] = []


def record(line: str) -> None:
    RESULTS.append(line)


def pytest_terminal_summary(terminalreporter):
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid256():
    return GridSpec(256, 256)


@pytest.fixture(scope="session")
def bump():
    # the shared bump for the rendering and reconstruction checks
    return make_sigmoidal_bump((128, 128), 50, 30, domain=(0, 255, 0, 255))


@pytest.fixture(scope="session")
def admissible_suite():
    return [RenderSpec.lambertian((0.3, 0.2, 0.93), name="lambert_a"),
            RenderSpec.lambertian((-0.25, 0.1, 0.96), name="lambert_b"),
            RenderSpec.lambertian((0.1, -0.3, 0.95), name="lambert_c"),
            RenderSpec.specular_blend((0.2, 0.2, 0.96), name="specular"),
            RenderSpec.slant(name="slant")]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
