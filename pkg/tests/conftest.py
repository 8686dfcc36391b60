import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zaksplit.spectral import Grid, SpectralField  # noqa: E402
from zaksplit.splitting import ZakharovState  # noqa: E402


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_field(grid: Grid, rng, decay: float = 0.0, scale: float = 1.0) -> SpectralField:
    c = rng.standard_normal(grid.shape) + 1j * rng.standard_normal(grid.shape)
    return SpectralField(grid, scale * c * grid.weight ** (-decay))


def random_state(grid: Grid, rng, decay: float = 2.0, scale: float = 0.5) -> ZakharovState:
    return ZakharovState(
        random_field(grid, rng, decay, scale),
        random_field(grid, rng, decay, scale),
        random_field(grid, rng, decay, scale),
        0.0,
    )


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.RESULTS:
        terminalreporter.write_line(line)
