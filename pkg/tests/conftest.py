import numpy as np
import pytest

from flyact.video_io import FrameVolume, generate_synthetic


@pytest.fixture(scope="session")
def orbit():
    """Noise-free orbiting blob, 64x64x60, with its ground truth."""
    return generate_synthetic("orbiting_blob", 64, 64, 60, 0.0, seed=7)


@pytest.fixture(scope="session")
def textured_volume():
    rng = np.random.default_rng(11)
    return FrameVolume(rng.uniform(0.2, 0.8, size=(20, 24, 24)))


@pytest.fixture(scope="session")
def separable_blobs():
    """Two 20-sample Gaussian blobs in signature space, 10 stds apart."""
    rng = np.random.default_rng(5)
    d = 16
    direction = rng.normal(size=d)
    direction /= np.linalg.norm(direction)
    a = rng.normal(0.0, 1.0, size=(20, d))
    b = rng.normal(0.0, 1.0, size=(20, d)) + 10.0 * direction
    X = np.vstack([a, b])
    y = np.array(["hold"] * 20 + ["tussle"] * 20)
    return X, y


ACCEPTANCE_RESULTS = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        status, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {status} - {detail}")
