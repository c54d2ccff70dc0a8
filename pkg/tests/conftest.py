from __future__ import annotations

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from secbonus import _backend, _purepy  # noqa: E402

try:
    from secbonus import _speedups
except ImportError:  # pragma: no cover - depends on the build
    _speedups = None

FIXTURES = Path(__file__).parent / "fixtures"

_KERNELS = {"python": _purepy, "cython": _speedups}


@pytest.fixture(params=["python", "cython"])
def backend(request, monkeypatch):
    """Run a test once per kernel implementation."""
    impl = _KERNELS[request.param]
    if impl is None:
        pytest.skip("compiled kernels not built")
    monkeypatch.setattr(_backend, "count_code_lines", impl.count_code_lines)
    monkeypatch.setattr(_backend, "shapley_values", impl.shapley_values)
    return request.param


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def team_repos(tmp_path_factory):
    """The two-sprint git fixture; built once, never modified by tests."""
    import e2e

    root = tmp_path_factory.mktemp("repos")
    return root, e2e.build_repos(root)


@pytest.fixture
def team_config(tmp_path, team_repos):
    import e2e

    return e2e.write_config(tmp_path, team_repos[0])


_acceptance: list[tuple[str, str, float]] = []


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    for mark_name, args in getattr(report, "acceptance", ()):
        _acceptance.append((args, report.outcome, report.duration))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is not None:
        report.acceptance = [("acceptance", marker.args[0])]


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome, duration in _acceptance:
        status = "PASS" if outcome == "passed" else "FAIL"
        terminalreporter.write_line(f"[{status}] {name} ({duration:.2f}s)")
