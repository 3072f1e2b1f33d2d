import re
from pathlib import Path

import pytest

from sasim.scenario import load_scenario, parse_scenario

SCENARIOS = Path(__file__).resolve().parents[1] / "src" / "sasim" / "scenarios"


def simple_text(*, demands: bool = True) -> str:
    text = (SCENARIOS / "simple.scn").read_text(encoding="utf-8")
    if not demands:
        text = text.split("[demand]")[0]
    return text


def set_detector(text: str, kind: str, link: str, distance: float) -> str:
    pattern = rf"(kind = {kind}\nlink = {link}\ndistance_to_stopline = )[0-9.]+"
    new, n = re.subn(pattern, rf"\g<1>{distance:g}", text)
    assert n == 1, (kind, link)
    return new


def set_link_length(text: str, link: str, length: float) -> str:
    new, n = re.subn(rf"(id = {link}\nlength = )[0-9.]+", rf"\g<1>{length:g}", text)
    assert n == 1, link
    return new


@pytest.fixture(scope="session")
def simple_net():
    return load_scenario("simple.scn")


@pytest.fixture(scope="session")
def empty_net():
    return parse_scenario(simple_text(demands=False), name="empty")


@pytest.fixture(scope="session")
def corridor_net():
    return load_scenario("corridor9.scn")


# one "PASS/FAIL criterion N: ..." line per acceptance criterion, echoed in the summary
CRITERIA: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(CRITERIA, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
