import logging

import numpy as np

from frackin.exts._common import build, order, phase_grid
from frackin.kinetic import (
    KineticScenario,
    LinearSolver,
    MagneticForm,
    linear_evolve,
    linearization_residual,
    magnetic_term,
)
from frackin.runner import RunnerRegistry, RunResult
from frackin.scenario import Scenario

log = logging.getLogger(__name__)


def kinetic_scenario(scenario: Scenario) -> KineticScenario:
    """Assemble the physical setup from the scenario's grid, rules and physics."""
    grid = phase_grid(scenario)
    physics = scenario.section("physics")
    return KineticScenario(
        order=order(scenario),
        grid=grid,
        mass=physics["mass"],
        charge=physics["charge"],
        light_speed=physics["light_speed"],
        electric=build(scenario, "electric", grid),
        magnetic=build(scenario, "magnetic", grid),
        background=build(scenario, "background", grid),
        perturbation=build(scenario, "initial", grid),
        transport=(physics["transport"],) * grid.n,
    )


def magnetic_form_gap(physical: KineticScenario) -> float:
    """Relative max-norm gap between the Leibniz and contracted magnetic terms."""
    delta = physical.initial_perturbation()
    forms = [
        magnetic_term(delta, physical.magnetic, physical, physical.order, form).values
        for form in (MagneticForm.LEIBNIZ, MagneticForm.CONTRACTED)
    ]
    scale = max(float(np.max(np.abs(forms[1]))), np.finfo(float).tiny)
    return float(np.max(np.abs(forms[0] - forms[1]))) / scale


def run_kinetic_linear(scenario: Scenario) -> RunResult:
    """Evolve the first perturbation and compare it with the stable-law profile."""
    physical = kinetic_scenario(scenario)
    stepping = scenario.section("stepping")
    tolerances = scenario.section("tolerances")

    run = linear_evolve(
        physical,
        stepping["dt"],
        stepping["steps"],
        LinearSolver(stepping["solver"]),
        stepping["stride"],
    )
    diagnostics = run.diagnostics
    result = RunResult(columns=diagnostics.columns(), rows=diagnostics.rows())
    result.gate(
        "plain_mass_drift", diagnostics.drift("plain_mass"), tolerances["mass_drift"]
    )
    if "profile_linf_error" in diagnostics.last.metrics:
        result.gate(
            "final_profile_error",
            diagnostics.last.metrics["profile_linf_error"],
            tolerances["profile_error"],
        )
    if physical.electric_components() is not None:
        residual, bound = linearization_residual(
            physical.initial_perturbation(), physical, physical.order
        )
        result.metrics.update(
            linearization_residual=residual, linearization_bound=bound
        )
    if physical.has_magnetic:
        gap = magnetic_form_gap(physical)
        result.gate("magnetic_form_gap", gap, tolerances["max_error"])
    return result


def setup(registry: RunnerRegistry) -> None:
    """Add the kinetic-linear runner to the registry."""
    registry.add_runner("kinetic-linear", run_kinetic_linear)
