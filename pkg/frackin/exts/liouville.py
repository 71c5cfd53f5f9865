import logging

import numpy as np

from frackin.constants import Gates
from frackin.exts._common import build, diagnostic_table, order, phase_grid
from frackin.phase import (
    EvolutionForm,
    HamiltonianSpec,
    PhaseDensity,
    PhaseField,
    bracket_antisymmetry_residual,
    evolution_form_gap,
    liouville_evolve,
)
from frackin.runner import RunnerRegistry, RunResult
from frackin.scenario import Scenario

log = logging.getLogger(__name__)


def run_liouville(scenario: Scenario) -> RunResult:
    """Evolve a density under an analytic Hamiltonian and report conservation."""
    grid = phase_grid(scenario)
    alpha = order(scenario)
    stepping = scenario.section("stepping")
    tolerances = scenario.section("tolerances")

    hamiltonian = HamiltonianSpec.analytic(grid, build(scenario, "hamiltonian", grid))
    initial = PhaseField.sample(grid, build(scenario, "initial", grid))
    rho0 = PhaseDensity.normalized(initial)
    form = None if stepping["form"] == "auto" else EvolutionForm(stepping["form"])

    antisymmetry = bracket_antisymmetry_residual(
        rho0.field, hamiltonian.hamiltonian, alpha
    )
    if alpha.alpha != 1.0 and antisymmetry > Gates.symmetry_tolerance:
        log.warning(
            f"Bracket antisymmetry residual at alpha={alpha.alpha} is "
            + f"{antisymmetry:.3g}; the fractional bracket is not antisymmetric"
        )

    density, diagnostics = liouville_evolve(
        rho0, hamiltonian, alpha, stepping["dt"], stepping["steps"], form
    )
    columns, rows = diagnostic_table(diagnostics, stepping["stride"])
    result = RunResult(columns=columns, rows=rows)
    result.metrics["antisymmetry_residual"] = antisymmetry
    result.metrics.update(evolution_form_gap(rho0, hamiltonian, alpha))
    result.metrics["fractional_mass_drift"] = diagnostics.drift("fractional_mass")
    result.gate(
        "plain_mass_drift", diagnostics.drift("plain_mass"), tolerances["mass_drift"]
    )
    change = float(np.max(np.abs(density.values - rho0.values)))
    result.gate("linf_change", change, tolerances["max_error"])
    return result


def setup(registry: RunnerRegistry) -> None:
    """Add the liouville runner to the registry."""
    registry.add_runner("liouville", run_liouville)
