import numpy as np
import pytest

from gwtucker.channel_model import SystemTopology, generate_channel_set

# desk-scale system used across modules
DESK = dict(J=3, K=2, M=8, N=16, P=12, L=2, sigma=0.1)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_orthonormal(rng, rows, cols):
    Q, _ = np.linalg.qr(crandn(rng, rows, cols))
    return Q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def desk_topology():
    return SystemTopology(**DESK)


@pytest.fixture(scope="session")
def desk_channels(desk_topology):
    return generate_channel_set(desk_topology, seed=7)


_CRITERIA = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None or not marker.args:
        return
    number, title = marker.args
    if report.when == "call" or (report.when == "setup" and not report.passed):
        _CRITERIA[number] = (title, report.passed, report.duration)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, duration = _CRITERIA[number]
        status = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"criterion {number}: {status} ({duration:.2f} s) {title}")
