import pytest

from blockspmm.partition import PartitionConfig
from oracles import golden_matrix

_acceptance_lines: list[str] = []


@pytest.fixture
def golden():
    return golden_matrix()


@pytest.fixture
def cfg22():
    return PartitionConfig(max_block_warps=2, max_warp_nzs=2)


@pytest.fixture
def record_criterion():
    """Acceptance tests report one line each; printed in the terminal summary."""

    def _record(number: int, name: str, passed: bool, detail: str = ""):
        status = "PASS" if passed else "FAIL"
        _acceptance_lines.append(f"[criterion {number}] {status} {name}" + (f" ({detail})" if detail else ""))
        return passed

    return _record


def pytest_terminal_summary(terminalreporter):
    if _acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_acceptance_lines, key=lambda s: int(s.split("]")[0].split()[-1])):
            terminalreporter.write_line(line)
