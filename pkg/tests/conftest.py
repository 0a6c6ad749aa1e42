import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

DATA = Path(__file__).parent / "data"

_acceptance_results = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(number, title): exit criterion from the build contract")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    key = marker.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        prev = _acceptance_results.get(key, True)
        _acceptance_results[key] = prev and rep.outcome == "passed"


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_results:
        return
    terminalreporter.section("acceptance criteria")
    for (num, title), ok in sorted(_acceptance_results.items()):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num:>2}. {title}")


def band_limited(seed, shape, sigma=2.0):
    from scipy import ndimage

    rng = np.random.default_rng(seed)
    n = ndimage.gaussian_filter(rng.random(shape), sigma)
    return (n - n.min()) / (n.max() - n.min())


def shifted_pair(seed, size, dx, dy, sigma=2.0, pad=16):
    """Two crops of one texture; content moves by (+dx, +dy) from the first to the second."""
    h, w = size
    big = band_limited(seed, (h + 2 * pad, w + 2 * pad), sigma)
    a = big[pad : pad + h, pad : pad + w]
    b = big[pad - dy : pad - dy + h, pad - dx : pad - dx + w]
    return a, b


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
