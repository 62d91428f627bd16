import os
import sys

import pytest

sys.path.insert(0, os.path.dirname(__file__))

from passive_qkd.channel import ChannelParams  # noqa: E402
from passive_qkd.transmitter import TransmitterParams  # noqa: E402


@pytest.fixture
def params():
    return TransmitterParams()


@pytest.fixture
def channel():
    return ChannelParams()


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, ok, detail in sorted(RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}: {detail}")
