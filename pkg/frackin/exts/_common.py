from typing import Callable

import numpy as np

from frackin.bogoliubov import PairForceKernel
from frackin.diagnostics import Diagnostics
from frackin.errors import GridError
from frackin.fraccore import FractionalOrder, Grid1D
from frackin.phase import PhaseGrid
from frackin.registry import rules
from frackin.scenario import Scenario


def phase_grid(scenario: Scenario) -> PhaseGrid:
    """Phase grid with the scenario's q and p axes repeated per degree of freedom."""
    grid = scenario.section("grid")
    n = grid["degrees_of_freedom"]
    q_axis = Grid1D(grid["q_lower"], grid["q_h"], grid["q_count"])
    p_axis = Grid1D(grid["p_lower"], grid["p_h"], grid["p_count"])
    return PhaseGrid((q_axis,) * n, (p_axis,) * n)


def particle_grid(scenario: Scenario) -> PhaseGrid:
    grid = phase_grid(scenario)
    if grid.n != 1:
        raise GridError(f"{scenario.kind} runs with one degree of freedom per particle")
    return grid


def order(scenario: Scenario) -> FractionalOrder:
    return FractionalOrder(scenario.alpha)


def build(scenario: Scenario, slot: str, grid: PhaseGrid) -> object:
    """Build the registry rule the scenario names for `slot`."""
    name = scenario.section("rules")[slot]
    return rules.build(slot, name, scenario.section("physics"), grid)


def velocity_rule(scenario: Scenario) -> Callable:
    """v = p / m, broadcast against q."""
    mass = scenario.section("physics")["mass"]
    return lambda q, p: np.broadcast_to(p / mass, np.broadcast(q, p).shape)


def pair_kernel(scenario: Scenario, grid: PhaseGrid) -> PairForceKernel:
    names = scenario.section("rules")
    return PairForceKernel(
        pair=build(scenario, "pair_force", grid),
        external=build(scenario, "external_force", grid),
        name=f"{names['pair_force']}+{names['external_force']}",
    )


def diagnostic_table(diagnostics: Diagnostics, stride: int = 1) -> tuple:
    """Columns and every `stride`-th diagnostics row, always ending at the last."""
    rows = diagnostics.rows()
    kept = rows[::stride]
    if (len(rows) - 1) % stride:
        kept.append(rows[-1])
    return diagnostics.columns(), kept
