import numpy as np
import pytest

from tempadapt.data import SynthConfig, generate_synthetic
from tempadapt.pipeline import prepare

ACCEPTANCE_RESULTS = pytest.StashKey[dict]()
ACCEPTANCE_NOTES = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: multi-minute end-to-end runs")
    config.addinivalue_line("markers", "criterion(name): acceptance criterion checked by this test")
    config.stash[ACCEPTANCE_RESULTS] = {}
    config.stash[ACCEPTANCE_NOTES] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    results = item.config.stash[ACCEPTANCE_RESULTS]
    name = marker.args[0]
    failed = report.failed
    if report.when == "call" or failed:
        ok = results.get(name, True) and not failed and not report.skipped
        results[name] = ok


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash[ACCEPTANCE_RESULTS]
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for note in config.stash[ACCEPTANCE_NOTES]:
        terminalreporter.write_line(note)
    for name, ok in results.items():
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}")


@pytest.fixture
def acceptance_note(request):
    """Append a line to the acceptance summary printed at the end of the run."""
    return request.config.stash[ACCEPTANCE_NOTES].append


@pytest.fixture(scope="session")
def small_bundle():
    return generate_synthetic(SynthConfig(n_buildings=3, days=20, seed=3))


@pytest.fixture(scope="session")
def small_prepared(small_bundle):
    return prepare(small_bundle)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
