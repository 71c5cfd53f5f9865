import logging
from typing import Optional

from frackin.bogoliubov import (
    NBodyDensity,
    boundary_vanishing_check,
    evolved_residual,
    order_exchange_residual,
    reduce,
    surface_term,
)
from frackin.exts._common import (
    build,
    order,
    pair_kernel,
    particle_grid,
    velocity_rule,
)
from frackin.phase import PhaseGrid
from frackin.runner import RunnerRegistry, RunResult
from frackin.scenario import Scenario

log = logging.getLogger(__name__)

COLUMNS = [
    "dt",
    "residual",
    "surface_term",
    "order_exchange_residual",
    "symmetry_residual",
    "boundary_max",
]


def nbody_density(scenario: Scenario, grid: Optional[PhaseGrid] = None) -> NBodyDensity:
    """Normalized product of the initial rule over `physics.particles` particles."""
    grid = particle_grid(scenario) if grid is None else grid
    initial = build(scenario, "initial", grid)

    def product(*coordinates):
        values = 1.0
        for q, p in zip(coordinates[::2], coordinates[1::2]):
            values = values * initial([q], [p])
        return values

    N = scenario.section("physics")["particles"]
    return NBodyDensity.from_function(grid, N, product)


def measure_residual(scenario: Scenario, rhoN: NBodyDensity, dt: float) -> float:
    kernel = pair_kernel(scenario, rhoN.grid)
    return evolved_residual(rhoN, kernel, order(scenario), dt, velocity_rule(scenario))


def run_bogoliubov_residual(scenario: Scenario) -> RunResult:
    """Check the first hierarchy equation along an N-body Liouville trajectory."""
    rhoN = nbody_density(scenario)
    rho2 = reduce(rhoN, [1, 2])
    alpha = order(scenario)
    dt = scenario.section("stepping")["dt"]
    tolerances = scenario.section("tolerances")
    kernel = pair_kernel(scenario, rho2.grid)

    result = RunResult(columns=list(COLUMNS))
    residual = measure_residual(scenario, rhoN, dt)
    result.gate("residual", residual, tolerances["residual"])
    result.metrics.update(
        surface_term=surface_term(rho2, velocity_rule(scenario), alpha),
        order_exchange_residual=order_exchange_residual(rho2, kernel, alpha),
        symmetry_residual=rhoN.symmetry_residual(),
        boundary_max=boundary_vanishing_check(rhoN).max_face,
        reciprocity_residual=kernel.reciprocity_residual(rho2.grid),
    )
    result.rows = [[dt] + [result.metrics[name] for name in COLUMNS[1:]]]
    return result


def setup(registry: RunnerRegistry) -> None:
    """Add the bogoliubov-residual runner to the registry."""
    registry.add_runner("bogoliubov-residual", run_bogoliubov_residual)
