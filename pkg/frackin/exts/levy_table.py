import logging

import numpy as np

from frackin.levy import (
    cauchy_density,
    gauss_density,
    levy_density_series,
    levy_density_values,
    tail_report,
)
from frackin.runner import RunnerRegistry, RunResult
from frackin.scenario import Scenario

log = logging.getLogger(__name__)

CLOSED_FORMS = {1.0: cauchy_density, 2.0: gauss_density}


def table_abscissae(table: dict) -> list:
    """x_min, x_min + step, ... up to x_max, without accumulating round-off."""
    count = int(round((table["x_max"] - table["x_min"]) / table["x_step"])) + 1
    return [table["x_min"] + i * table["x_step"] for i in range(count)]


def run_levy_table(scenario: Scenario) -> RunResult:
    """Tabulate the symmetric stable density, with closed forms at α = 1 and 2."""
    alpha = scenario.alpha
    table = scenario.section("table")
    tolerances = scenario.section("tolerances")
    xs = table_abscissae(table)

    if table["method"] == "series":
        density = np.array([levy_density_series(alpha, x) for x in xs])
    else:
        density = levy_density_values(alpha, xs)

    result = RunResult(columns=["x", "density"])
    closed_form = CLOSED_FORMS.get(alpha)
    if closed_form is None:
        result.rows = [[x, float(d)] for x, d in zip(xs, density)]
    else:
        reference = closed_form(np.array(xs))
        result.columns.append("reference")
        result.rows = [
            [x, float(d), float(r)] for x, d, r in zip(xs, density, reference)
        ]
        error = float(np.max(np.abs(density - reference)))
        result.gate("max_reference_error", error, tolerances["max_error"])

    if table["tail_points"]:
        report = tail_report(alpha, table["tail_points"])
        result.metrics["fitted_exponent"] = report.fitted_exponent
        result.metrics["tail"] = [list(row) for row in report.rows()]
        result.gate(
            "exponent_error", report.exponent_error, tolerances["exponent_error"]
        )
    return result


def setup(registry: RunnerRegistry) -> None:
    """Add the levy-table runner to the registry."""
    registry.add_runner("levy-table", run_levy_table)
