import logging

import numpy as np

from frackin.bogoliubov import NBodyDensity, collision_term
from frackin.exts._common import (
    build,
    diagnostic_table,
    order,
    pair_kernel,
    particle_grid,
    velocity_rule,
)
from frackin.kinetic import effective_force, vlasov_evolve
from frackin.phase import PhaseDensity, PhaseField, d_p
from frackin.runner import RunnerRegistry, RunResult
from frackin.scenario import Scenario

log = logging.getLogger(__name__)


def mean_field_gap(rho1: PhaseDensity, kernel, alpha, N_total: int) -> float:
    """Max-norm gap between the collision term of ρ1ρ1 and -(N-1) D_p1(ρ1 F^eff)."""
    rho2 = NBodyDensity.product(rho1.field, rho1.field)
    collision = collision_term(rho2, kernel, alpha, N_total).values
    flux = rho1.values * effective_force(rho1, kernel).values
    mean_field = -(N_total - 1) * d_p(flux, rho1.grid, 0, alpha)
    return float(np.max(np.abs(collision - mean_field)))


def run_vlasov(scenario: Scenario) -> RunResult:
    """Evolve the mean-field closure and check it against the collision term."""
    grid = particle_grid(scenario)
    alpha = order(scenario)
    stepping = scenario.section("stepping")
    tolerances = scenario.section("tolerances")
    N_total = scenario.section("physics")["particles"]
    kernel = pair_kernel(scenario, grid)

    rho0 = PhaseDensity.normalized(
        PhaseField.sample(grid, build(scenario, "initial", grid))
    )
    gap = mean_field_gap(rho0, kernel, alpha, N_total)
    _, diagnostics = vlasov_evolve(
        rho0,
        kernel,
        alpha,
        N_total,
        stepping["dt"],
        stepping["steps"],
        velocity_rule(scenario),
    )
    columns, rows = diagnostic_table(diagnostics, stepping["stride"])
    result = RunResult(columns=columns, rows=rows)
    result.gate("mean_field_gap", gap, tolerances["max_error"])
    result.gate(
        "plain_mass_drift", diagnostics.drift("plain_mass"), tolerances["mass_drift"]
    )
    return result


def setup(registry: RunnerRegistry) -> None:
    """Add the vlasov runner to the registry."""
    registry.add_runner("vlasov", run_vlasov)
