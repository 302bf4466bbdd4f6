import numpy as np
import pytest
from scipy import ndimage

ACCEPTANCE_KEY = pytest.StashKey[list]()


def smooth_texture(seed, h=64, w=64, c=3, sigma=1.0):
    rng = np.random.default_rng(seed)
    tex = ndimage.gaussian_filter(rng.random((h, w, c)), (sigma, sigma, 0), mode="wrap")
    return (tex - tex.min()) / (tex.max() - tex.min())


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def texture():
    return smooth_texture(7)


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(lines):
        terminalreporter.write_line(line[1])
