import json
from pathlib import Path

import numpy as np
import pytest

from frackin.bogoliubov import NBodyDensity
from frackin.fraccore import Grid1D
from frackin.phase import PhaseGrid


@pytest.fixture
def unit_grid() -> Grid1D:
    """1001 nodes on [0, 1], starting at the Caputo terminal."""
    return Grid1D.spanning(0.0, 1.0, 1001)


@pytest.fixture
def particle_grid() -> PhaseGrid:
    """One (q, p) pair per particle on [-5, 5]."""
    return PhaseGrid.uniform(1, -5.0, 0.5, 21)


@pytest.fixture
def offset_particle_grid() -> PhaseGrid:
    """Particle grid on the positive half-line, offset h/2 from 0."""
    axis = Grid1D.offset(0.5, 21)
    return PhaseGrid((axis,), (axis,))


@pytest.fixture
def gaussian_density():
    """Factory for normalized, permutation-symmetric N-body Gaussians."""

    def build(
        grid: PhaseGrid,
        N: int = 2,
        center: float = 0.0,
        sigma: float = 0.8,
        coupling: float = 0.0,
    ) -> NBodyDensity:
        def function(*coordinates: np.ndarray) -> np.ndarray:
            shifted = [x - center for x in coordinates]
            exponent = -sum(x**2 for x in shifted) / (2.0 * sigma**2)
            qs = shifted[::2]
            for i in range(N):
                for j in range(i + 1, N):
                    exponent = exponent - coupling * qs[i] * qs[j]
            return np.exp(exponent)

        return NBodyDensity.from_function(grid, N, function)

    return build


@pytest.fixture
def scenario_file(tmp_path):
    """Write a scenario document into a temporary file and return its path."""

    def write(document: dict, name: str = "scenario") -> Path:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return write
