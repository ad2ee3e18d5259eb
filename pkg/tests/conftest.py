import os

import pytest

from jacobs_ladder import DEFAULT_C0, EULER_GAMMA, JacobsLadder, LadderConstants, build_table

# coverage for every test: towers at T = 1e4, k = 3 reach about 11550
TABLE_MAX = 12000.0


@pytest.fixture(scope="session")
def table_cache(tmp_path_factory):
    """Path of the shared table cache; JACOBS_LADDER_CACHE reuses one across runs."""
    env = os.environ.get("JACOBS_LADDER_CACHE")
    if env:
        return env
    return str(tmp_path_factory.mktemp("cache") / "hl_table.csv")


@pytest.fixture(scope="session")
def table(table_cache):
    return build_table(TABLE_MAX, cache_path=table_cache)


@pytest.fixture(scope="session")
def ladder(table):
    return JacobsLadder(table, LadderConstants(EULER_GAMMA, DEFAULT_C0))


# acceptance criteria report one line each at the end of the run
_CRITERIA = {}


def record_criterion(number: int, title: str, passed: bool, detail: str):
    _CRITERIA[number] = (title, passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        title, passed, detail = _CRITERIA[n]
        terminalreporter.write_line(
            f"criterion {n} [{'PASS' if passed else 'FAIL'}] {title}: {detail}")
