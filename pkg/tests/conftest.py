from __future__ import annotations

import numpy as np
import pytest

from qstencil.statevector import ShotSampler

TABLE1 = [0.9040, 0.0112, 0.0960, 0.9888]


@pytest.fixture
def sampler() -> ShotSampler:
    return ShotSampler(1234)


def random_weights(rng: np.random.Generator, n: int = 3) -> np.ndarray:
    w = rng.random(n)
    return w / w.sum()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion")[1].split(":")[0])):
            terminalreporter.write_line(line)
