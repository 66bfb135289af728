import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from nctorus import afk, gns  # noqa: E402


@pytest.fixture(scope="session")
def build_o_n():
    return afk.build_from_config(afk.PRESETS["o_n"])


@pytest.fixture(scope="session")
def build_growth():
    return afk.build_from_config(afk.PRESETS["growth"])


@pytest.fixture(scope="session")
def build_o_log_n():
    return afk.build_from_config(afk.PRESETS["o_log_n"])


@pytest.fixture(scope="session")
def md_o_n(build_o_n):
    return gns.ModularData.from_build(build_o_n)


@pytest.fixture(scope="session")
def md_growth(build_growth):
    return gns.ModularData.from_build(build_growth)


# acceptance reporting: one PASS/FAIL line per criterion in the terminal summary

def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    m = item.get_closest_marker("criterion")
    if m is None or not (rep.when == "call" or rep.failed):
        return
    detail = dict(item.user_properties).get("detail", "")
    if rep.failed and rep.when != "call":
        detail = f"error during {rep.when}"
    item.config._acceptance[m.args[0]] = (m.args[1], rep.passed and rep.when == "call", detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    res = getattr(config, "_acceptance", {})
    if not res:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(res):
        title, ok, detail = res[n]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {n:2d}  {title}  {detail}")
