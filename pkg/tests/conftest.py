import pytest

from adann.dataset_io import generate_dataset, split_dataset
from adann.orchestration import RunData
from adann.problems import get_problem


@pytest.fixture(scope="session")
def rd1d_small():
    """512 rd1d samples: enough for quick training checks."""
    return generate_dataset(get_problem("rd1d"), 512, seed=3)


@pytest.fixture(scope="session")
def rd1d_small_data(rd1d_small):
    return RunData.from_splits(split_dataset(rd1d_small))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
