import numpy as np
import pytest

from photoanthro.ingest import LANDMARK_IDS, N_LANDMARKS, Dataset, FaceRecord, LandmarkSet
from photoanthro.pai import compute_dataset_pais
from photoanthro.synth import default_growth_model, generate


def random_coords(rng, n=None):
    """Generic landmark clouds: iid uniform points in a 400 px box."""
    shape = (N_LANDMARKS, 2) if n is None else (n, N_LANDMARKS, 2)
    return rng.uniform(0, 400, size=shape)


def make_record(sid, sex="F", age=10, coords=None, seed=0):
    if coords is None:
        coords = random_coords(np.random.default_rng(seed))
    return FaceRecord(sid, sex, age, LandmarkSet(coords))


@pytest.fixture(scope="session")
def small_dataset() -> Dataset:
    return generate(default_growth_model(seed=11), n_per_cell=6)


@pytest.fixture(scope="session")
def small_table(small_dataset):
    return compute_dataset_pais(small_dataset)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


__all__ = ["random_coords", "make_record", "LANDMARK_IDS"]


_ACCEPTANCE_LINES: list[tuple[int, str]] = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def _record(number: int, title: str, passed: bool, detail: str):
        line = f"[{'PASS' if passed else 'FAIL'}] {number}. {title}: {detail}"
        _ACCEPTANCE_LINES.append((number, line))
        print(line)
        assert passed, line
    return _record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(_ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
