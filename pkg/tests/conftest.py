import numpy as np
import pytest

from tfspde import spectral, tfgn


def make_increments(basis, steps, horizon=1.0, hurst=0.8, mu=1.0, seed=5, trajectory=0):
    grid = tfgn.TimeGrid(horizon, steps)
    p = tfgn.TemperingParams(hurst, mu)
    return tfgn.sample_increments(tfgn.shared_factor(p, grid), basis.mode_tuples(), seed,
                                  grid=grid, params=p, trajectory=trajectory)


@pytest.fixture
def basis3():
    return spectral.build_basis(2, 3)


@pytest.fixture
def rng():
    return np.random.default_rng(20261014)


# Acceptance verdicts collected by test_acceptance; printed once at the end so
# they are visible even when pytest captures stdout.
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
    by_criterion = {}
    for line in ACCEPTANCE_LINES:
        crit = line.split("]", 1)[0].split("[", 1)[1].split(" ")[0]
        by_criterion.setdefault(crit, []).append(line.startswith("PASS"))
    for crit, oks in by_criterion.items():
        verdict = "PASS" if all(oks) else "FAIL"
        terminalreporter.write_line(f"{verdict} criterion {crit}: {sum(oks)}/{len(oks)} cases pass")
