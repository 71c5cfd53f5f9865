from pathlib import Path

import pytest

from frackin.diagnostics import Diagnostics, DiagnosticsRecord
from frackin.errors import GateFailure, GridError, ScenarioValidationError
from frackin.exts._common import diagnostic_table, phase_grid
from frackin.exts.kinetic_linear import kinetic_scenario, magnetic_form_gap
from frackin.exts.levy_table import table_abscissae
from frackin.runner import RunnerRegistry, RunResult, default_registry, run
from frackin.scenario import load_scenario, validate

SCENARIO_DIR = Path(__file__).resolve().parent.parent / "scenarios"


@pytest.fixture(scope="module")
def registry() -> RunnerRegistry:
    return default_registry()


def bundled(name: str):
    return load_scenario(SCENARIO_DIR / f"{name}.json")


def test_every_kind_has_a_runner(registry):
    assert sorted(registry.runners) == [
        "bogoliubov-residual",
        "convergence-sweep",
        "kinetic-linear",
        "levy-table",
        "liouville",
        "vlasov",
    ]
    with pytest.raises(ScenarioValidationError) as error:
        registry.get("levy-tabel")
    assert error.value.suggestion == "levy-table"


@pytest.mark.parametrize(
    "name",
    [
        "cauchy-table",
        "stable-tail",
        "caputo-convergence",
        "kinetic-gauss",
        "kinetic-levy",
        "kinetic-magnetic",
        "vlasov-mean-field",
        "harmonic-liouville",
        "bogoliubov-residual",
    ],
)
def test_bundled_scenarios_pass_their_gates(tmp_path, registry, name):
    result = run(bundled(name), registry, str(tmp_path))
    assert result.gates
    assert not result.failed_gates
    assert (tmp_path / f"{name}.csv").exists()
    assert (tmp_path / f"{name}.json").exists()


def test_gate_failure_is_raised_after_writing(tmp_path, registry):
    scenario = bundled("stable-tail").replace("tolerances.exponent_error", 1e-9)
    with pytest.raises(GateFailure):
        run(scenario, registry, str(tmp_path))
    assert (tmp_path / "stable-tail.csv").exists()


def test_output_stem_overrides_the_name(tmp_path, registry):
    scenario = bundled("cauchy-table").replace("output.stem", "cauchy")
    run(scenario, registry, str(tmp_path))
    assert (tmp_path / "cauchy.csv").exists()


def test_table_abscissae_do_not_accumulate_round_off():
    xs = table_abscissae({"x_min": -10.0, "x_max": 10.0, "x_step": 0.1})
    assert len(xs) == 201
    assert xs[0] == -10.0
    assert xs[-1] == pytest.approx(10.0, abs=1e-12)


def test_kinetic_scenario_from_rules():
    scenario = bundled("kinetic-magnetic")
    physical = kinetic_scenario(scenario)
    assert physical.grid.n == 3
    assert physical.magnetic == (0.0, 0.0, 0.5)
    assert physical.transport == (1.0, 1.0, 1.0)
    assert physical.electric_components() is None
    assert magnetic_form_gap(physical) <= 1e-8


def test_electric_runs_report_the_linearization(tmp_path, registry):
    scenario = validate(
        {
            "scenario": {"kind": "kinetic-linear", "alpha": 1, "name": "drive"},
            "grid": {
                "q_lower": -4,
                "q_h": 0.25,
                "q_count": 33,
                "p_lower": -4,
                "p_h": 0.25,
                "p_count": 33,
            },
            "rules": {
                "electric": "constant-E",
                "background": "maxwellian",
                "initial": "gaussian",
            },
            "physics": {"e_field": 0.3, "charge": 2, "sigma": 0.5},
            "stepping": {"dt": 0.01, "steps": 2, "solver": "caputo-grid"},
        }
    )
    result = run(scenario, registry, str(tmp_path))
    residual = result.metrics["linearization_residual"]
    assert residual <= result.metrics["linearization_bound"] * (1.0 + 1e-9)


def test_particle_runners_need_one_degree_of_freedom(registry):
    scenario = bundled("vlasov-mean-field").replace("grid.degrees_of_freedom", 2)
    assert phase_grid(scenario).n == 2
    with pytest.raises(GridError):
        registry.get("vlasov")(scenario)


def test_diagnostic_table_keeps_the_last_row():
    diagnostics = Diagnostics()
    for step in range(6):
        diagnostics.append(DiagnosticsRecord(float(step), plain_mass=1.0))
    _, rows = diagnostic_table(diagnostics, 2)
    assert [row[0] for row in rows] == [0.0, 2.0, 4.0, 5.0]
    _, rows = diagnostic_table(diagnostics, 5)
    assert [row[0] for row in rows] == [0.0, 5.0]


def test_run_result_gates():
    result = RunResult(columns=["x"])
    result.gate("reported", 3.0, None)
    result.gate("upper", 2.0, 1.0)
    result.gate("lower", 2.0, 1.0, at_least=True)
    assert result.metrics == {"reported": 3.0, "upper": 2.0, "lower": 2.0}
    assert [gate.name for gate in result.failed_gates] == ["upper"]
