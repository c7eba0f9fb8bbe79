import numpy as np
import pytest

from rramfv.mesh import DeviceGeometry, Resolution, build_mesh

COARSE = Resolution(dy=4e-9, dz_switch=1.25e-9, dz_max=10e-9, growth=1.6)


@pytest.fixture(scope="session")
def coarse_mesh():
    """10 x ~20 cell device mesh for fast coupled runs."""
    return build_mesh(DeviceGeometry(), COARSE)


@pytest.fixture(scope="session")
def default_mesh():
    return build_mesh(DeviceGeometry())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def coarse_scenario():
    from rramfv.scenario import PulseSpec, Scenario

    return Scenario(resolution=COARSE, noise_amplitude=0.0,
                    form_pulse=PulseSpec(-2.1, 2e-3), set_pulse=PulseSpec(-2.1, 2e-3),
                    reset_pulse=PulseSpec(1.0, 2e-3))


@pytest.fixture(scope="session")
def formed(coarse_scenario):
    """Forming trace of the coarse device (2 ms, -2.1 V)."""
    return coarse_scenario.form(snapshot_times=(2e-4, 1e-3))


FAST_CONFIG = """\
resolution: {dy: 4.0e-9, dz_switch: 1.25e-9, dz_max: 1.0e-8, growth: 1.6}
forming: {amplitude: -2.1, duration: 1.0e-3}
forming_ramp: {step: 0.05}
set: {amplitude: -2.1, duration: 1.0e-3}
reset: {amplitude: 1.0, duration: 1.0e-3}
cycling: {cycles: 2, noise_amplitude: 0.3}
output: {snapshots: [5.0e-4], vtk: true}
iv: {points: [0.0, -0.3, 0.0], step: 0.1, dwell: 1.0e-5}
sweep:
  K1: [9.4, 12.0]
  K2: [5.75, 8.0]
  cycles: 1
  resolution: {dy: 4.0e-9, dz_switch: 1.25e-9, dz_max: 1.0e-8, growth: 1.6}
"""


@pytest.fixture(scope="session")
def fast_config(tmp_path_factory):
    """Coarse, short-pulse run configuration for end-to-end CLI tests."""
    path = tmp_path_factory.mktemp("cfg") / "fast.yaml"
    path.write_text(FAST_CONFIG)
    return path


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
