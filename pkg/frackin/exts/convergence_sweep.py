import logging
import math

import numpy as np

from frackin.exts._common import order
from frackin.exts.bogoliubov_residual import measure_residual, nbody_density
from frackin.fraccore import (
    FractionalOrder,
    Grid1D,
    SampledField,
    caputo_deriv,
    caputo_monomial,
)
from frackin.phase import PhaseGrid
from frackin.runner import RunnerRegistry, RunResult
from frackin.scenario import Scenario

log = logging.getLogger(__name__)

COLUMNS = ["count", "h", "error", "ratio", "observed_order"]


def monomial_error(beta: float, alpha: FractionalOrder, x: float, count: int) -> tuple:
    """Spacing and error of the L1 Caputo derivative of x^β at `x`."""
    grid = Grid1D.spanning(0.0, x, count + 1)
    field = SampledField.sample(grid, lambda nodes: nodes**beta)
    numeric = caputo_deriv(field, alpha).values[-1]
    return grid.h, abs(numeric - caputo_monomial(beta, alpha, x))


def residual_error(scenario: Scenario, count: int) -> tuple:
    """Spacing and hierarchy residual with `count` nodes per axis over the same box."""
    grid = scenario.section("grid")
    counts = scenario.section("convergence")["counts"]
    q_upper = grid["q_lower"] + grid["q_h"] * (grid["q_count"] - 1)
    p_upper = grid["p_lower"] + grid["p_h"] * (grid["p_count"] - 1)
    q_axis = Grid1D.spanning(grid["q_lower"], q_upper, count)
    p_axis = Grid1D.spanning(grid["p_lower"], p_upper, count)
    phase = PhaseGrid((q_axis,), (p_axis,))

    dt = scenario.section("stepping")["dt"] * counts[0] / count
    return q_axis.h, measure_residual(scenario, nbody_density(scenario, phase), dt)


def run_convergence_sweep(scenario: Scenario) -> RunResult:
    """Error table over a refinement sequence with successive ratios and orders."""
    settings = scenario.section("convergence")
    tolerances = scenario.section("tolerances")
    alpha = order(scenario)
    log.debug(f"Convergence target {settings['target']} over {settings['counts']}")

    result = RunResult(columns=list(COLUMNS))
    previous = None
    ratios = []
    for count in settings["counts"]:
        if settings["target"] == "caputo-monomial":
            h, error = monomial_error(settings["beta"], alpha, settings["x"], count)
        else:
            h, error = residual_error(scenario, count)
        ratio = observed = None
        if previous is not None and error > 0:
            ratio = previous[1] / error
            observed = math.log(ratio) / math.log(previous[0] / h)
            ratios.append(ratio)
        result.rows.append([count, h, error, ratio, observed])
        previous = (h, error)

    result.gate("final_error", result.rows[-1][2], tolerances["max_error"])
    if ratios:
        result.gate("min_ratio", min(ratios), tolerances["min_ratio"], at_least=True)
        result.metrics["min_observed_order"] = float(
            np.min([row[4] for row in result.rows[1:] if row[4] is not None])
        )
    return result


def setup(registry: RunnerRegistry) -> None:
    """Add the convergence-sweep runner to the registry."""
    registry.add_runner("convergence-sweep", run_convergence_sweep)
