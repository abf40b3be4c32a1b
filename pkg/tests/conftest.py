import numpy as np
import pytest

from affinecrack.dataset import read_corpus
from affinecrack.network import init_params


@pytest.fixture(scope="session")
def corpus():
    return read_corpus()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def generic_params(cfg, rng):
    """Initialised weights with small random biases.

    With zero biases a unit fed only by dead units sits exactly on the ReLU
    kink, where central differences are one-sided and meaningless.
    """
    p = init_params(cfg, rng)
    for name, arr in p.items():
        if arr.ndim == 1:
            arr[...] = rng.uniform(-0.1, 0.1, size=arr.shape)
    return p


ACCEPTANCE_LINES: list[str] = []


def record(criterion: str, passed: bool, detail: str) -> bool:
    ACCEPTANCE_LINES.append(f"[{'PASS' if passed else 'FAIL'}] {criterion}: {detail}")
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
