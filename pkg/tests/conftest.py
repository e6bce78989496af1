import numpy as np
import pytest

from k2means.io import gen_gmm

# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def record(criterion: int, passed: bool, detail: str = "") -> None:
    ACCEPTANCE[criterion] = (bool(passed), detail)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for c in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[c]
        terminalreporter.write_line(f"criterion {c:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def blobs4():
    ds, labels = gen_gmm(400, 2, 4, 20.0, 0)
    return ds.points, labels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
