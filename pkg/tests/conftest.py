import numpy as np
import pytest

from mbiseries.grid import GridSpec, ScalarField, VectorField3


def bump(grid, center=(0.0, 0.0, 0.0), radius=4.0, power=4):
    """Compactly supported ``(1 - r^2/R^2)^power`` sampled on ``grid``."""
    x, y, z = grid.coords()
    r2 = (x - center[0]) ** 2 + (y - center[1]) ** 2 + (z - center[2]) ** 2
    return np.where(r2 < radius**2, (1.0 - r2 / radius**2) ** power, 0.0)


def random_compact_vector(grid, rng, radius, n_bumps=3, power=4):
    """Sum of randomly placed and weighted smooth bumps in each component."""
    v = np.zeros((3,) + grid.dims)
    half = 0.5 * grid.spacing * (min(grid.dims) - 1)
    for _ in range(n_bumps):
        c = rng.uniform(-0.2 * half, 0.2 * half, size=3)
        w = rng.normal(size=3)
        v += w[:, None, None, None] * bump(grid, c, radius, power)[None]
    return VectorField3(grid, v)


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def grid16():
    return GridSpec.centered(16, 1.0)


@pytest.fixture
def grid24():
    return GridSpec.centered(24, 1.0)


@pytest.fixture
def grid32():
    return GridSpec.centered(32, 1.0)


def scalar(grid, values):
    return ScalarField(grid, values)


ACCEPTANCE_LINES = []


@pytest.fixture
def verdict():
    """Record one PASS/FAIL line per acceptance criterion and print it."""

    def record(number, title, ok, detail):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
