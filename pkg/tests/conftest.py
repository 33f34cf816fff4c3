from pathlib import Path

import pytest

from bcpnn.config import TrainConfig
from bcpnn.mnist import load_mnist_dir

DESK_DIR = Path(__file__).resolve().parent.parent / "data" / "mnist-desk"


@pytest.fixture(scope="session")
def desk_dir():
    return DESK_DIR


@pytest.fixture(scope="session")
def desk_train():
    return load_mnist_dir(DESK_DIR, "train")


@pytest.fixture
def tiny_config():
    """A few seconds of training: small hidden layer, frequent rewiring."""
    return TrainConfig(n_train=150, n_val=50, hidden_hcs=3, hidden_mcs=4,
                       n_epochs_unsup=2, n_epochs_sup=2, n_flips=2,
                       flip_interval=25, seed=5).validate()


def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    lines = getattr(config, "acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """``criterion(name, ok, detail)`` records one PASS/FAIL line and asserts ``ok``."""
    def record(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  [{detail}]" if detail else "")
        print(line)
        request.config.acceptance_lines.append(line)
        assert ok, line
    return record
