import numpy as np
import pytest

from acceptance_log import RESULTS


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(RESULTS, key=lambda k: (int(str(k[0]).rstrip("ab")), str(k[0]), k[1])):
        terminalreporter.write_line(RESULTS[key])
