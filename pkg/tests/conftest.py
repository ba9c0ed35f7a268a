import pytest
from hypothesis import settings

# numba compiles kernels on first use, which would trip per-example deadlines
settings.register_profile("default", deadline=None)
settings.load_profile("default")

_criteria: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, text): an acceptance criterion")


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    marks = getattr(report, "criterion", None)
    if marks is None:
        return
    number, text = marks
    outcome = "PASS" if report.outcome == "passed" else "FAIL"
    prev = _criteria.get(number)
    if prev is None or prev[1] == "PASS":
        _criteria[number] = (text, outcome)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is not None:
        report.criterion = tuple(mark.args)


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_criteria):
        text, outcome = _criteria[number]
        terminalreporter.write_line(f"criterion {number:2d} {outcome}: {text}")


# Expensive sweeps shared between the bifurcation and acceptance tests.

@pytest.fixture(scope="session")
def stochastic_pitchfork_sweep():
    from stochbif import lookup_builtin, sweep

    return sweep(lookup_builtin("pitchfork"), "stochastic", -0.5, 1.0, 31)


@pytest.fixture(scope="session")
def deterministic_sweeps():
    # 26 samples on [-1, 1] avoid the degenerate r = 0 and keep every root at
    # least ~1e-3 from a cell face of the h = 0.01 grid, where first-order
    # transport needs t >> h / |f(face)| to settle.
    from stochbif import ScanConfig, lookup_builtin, sweep

    cfg = ScanConfig(t_final=300.0, dt=0.01)
    return {name: sweep(lookup_builtin(name), "deterministic", -1.0, 1.0, 26, cfg)
            for name in ("saddle-node", "transcritical", "pitchfork")}


@pytest.fixture(scope="session")
def stochastic_transcritical_sweep():
    from stochbif import lookup_builtin, sweep

    return sweep(lookup_builtin("transcritical"), "stochastic", -5.0, 2.0, 29)
