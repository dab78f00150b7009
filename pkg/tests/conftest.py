import os
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from sdforest.data import LabeledDataset, generate_pairs, split_pairs

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"


def blobs(seed, n=60, d=4, k=3, spread=1.0):
    """Gaussian class blobs with string labels."""
    rng = np.random.default_rng(seed)
    centers = rng.normal(0, 3, size=(k, d))
    labels = rng.integers(0, k, size=n)
    labels[:k] = np.arange(k)
    X = centers[labels] + rng.normal(0, spread, size=(n, d))
    return LabeledDataset(X, [f"c{v}" for v in labels])


@pytest.fixture
def small_ds():
    return blobs(0)


@pytest.fixture
def small_split(small_ds):
    pd = generate_pairs(small_ds, 150, seed=1)
    return split_pairs(pd, 90, seed=2)


@pytest.fixture(scope="session")
def ecoli_path():
    return DATA / "ecoli.csv"


# One line per acceptance criterion, repeated in the terminal summary so the
# verdicts show up even when output capture is on.
ACCEPTANCE_LINES = []


def report_criterion(n, ok, detail):
    line = f"CRITERION {n}: {'PASS' if ok else 'FAIL'} {detail}"
    ACCEPTANCE_LINES.append((n, line))
    print(line)
    return ok


def report_detail(n, text):
    line = f"    criterion {n}: {text}"
    ACCEPTANCE_LINES.append((n, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        # stable sort keeps each criterion's detail lines in emission order
        for _, line in sorted(ACCEPTANCE_LINES, key=lambda e: e[0]):
            terminalreporter.write_line(line)
