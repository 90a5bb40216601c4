import os

import numpy as np
import pytest

from esm_icp.geometry import euler_to_rotation

DATA = os.path.join(os.path.dirname(__file__), "data")
BUNNY = os.path.join(DATA, "bunny.pcd")
AIRPLANE = os.path.join(DATA, "airplane.off")

# Filled by test_acceptance; echoed in the terminal summary so `pytest | tee` keeps them.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def brute_force_nn(source, target):
    """O(N*M) nearest neighbour with lowest-index ties, on exact squared distances."""
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    idx = np.empty(len(src), dtype=np.int64)
    dist = np.empty(len(src))
    for i, p in enumerate(src):
        diff = tgt - p
        d2 = diff[:, 0] ** 2 + diff[:, 1] ** 2 + diff[:, 2] ** 2
        j = int(np.argmin(d2))  # argmin returns the first minimum
        idx[i], dist[i] = j, np.sqrt(d2[j])
    return idx, dist


def random_rotation(rng):
    return euler_to_rotation(rng.uniform(-np.pi, np.pi, 3))


def haar_rotation(rng):
    q, r = np.linalg.qr(rng.standard_normal((3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
