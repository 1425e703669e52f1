import numpy as np
import pytest

from seriesindex.datasets import random_walks


@pytest.fixture(scope="session")
def walks_2k():
    return random_walks(2000, 64, seed=11)


@pytest.fixture(scope="session")
def walks_20k():
    return random_walks(20000, 128, seed=5)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


_VERDICTS = []


class _Criterion:
    def __init__(self, name):
        self.name = name
        self.detail = ""

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            line = f"{self.name}: PASS  {self.detail}"
        else:
            msg = str(exc).splitlines()[0] if str(exc) else exc_type.__name__
            line = f"{self.name}: FAIL  {self.detail}  ({msg})"
        _VERDICTS.append(line)
        print(line)
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in _VERDICTS:
            terminalreporter.write_line(line)
