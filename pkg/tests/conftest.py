from pathlib import Path

import pytest

from cflog.parser import parse_program

DATA = Path(__file__).parent / "data"


def load(name: str, exact: bool = False):
    return parse_program((DATA / name).read_text(), exact=exact)


@pytest.fixture
def smoking():
    return load("smoking.pl")


@pytest.fixture
def smoking_exact():
    return load("smoking.pl", exact=True)


@pytest.fixture
def power():
    return load("power_failure.pl")


@pytest.fixture
def power_exact():
    return load("power_failure.pl", exact=True)
