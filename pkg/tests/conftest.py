"""Shared fixtures and the acceptance-line reporter.

Acceptance tests append one human-readable pass/fail line per criterion; the
terminal-summary hook replays them at the end of the run so the verdicts are
visible even when pytest captures stdout.
"""

import numpy as np
import pytest

from steerkit import Embedding, make_gaussian_model, make_mixture_model

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def criterion_report():
    def _report(line: str) -> None:
        ACCEPTANCE_LINES.append(line)
        print(line)

    return _report


def gaussian_fixture(seed: int):
    """Affine-prior model plus a matching random embedding."""
    model = make_gaussian_model({"u": 3, "v": 4}, D=6, s0=0.7, seed=seed)
    rng = np.random.default_rng(seed + 1000)
    c = Embedding({"u": rng.standard_normal(3), "v": rng.standard_normal(4)})
    return model, c


def mixture_fixture(seed: int):
    """3-mode mixture model plus a matching random embedding."""
    model = make_mixture_model(
        {"u": 3, "v": 4}, D=6,
        weights=(0.5, 0.3, 0.2), stds=(0.4, 0.7, 1.0),
        seed=seed, mean_scale=1.5,
    )
    rng = np.random.default_rng(seed + 1000)
    c = Embedding({"u": rng.standard_normal(3), "v": rng.standard_normal(4)})
    return model, c
