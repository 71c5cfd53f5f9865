import importlib
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

from frackin.constants import Output, Runtime
from frackin.errors import FrackinError, GateFailure, ScenarioValidationError
from frackin.output import emit_table
from frackin.registry import suggest
from frackin.scenario import Scenario, expand_sweep

log = logging.getLogger(__name__)

EXTENSIONS_DIR = Path(__file__).resolve().parent / "exts"


@dataclass
class Gate:
    """A measured value held against a tolerance from the scenario."""

    name: str
    value: float
    limit: float
    at_least: bool = False

    @property
    def passed(self) -> bool:
        if self.at_least:
            return self.value >= self.limit
        return self.value <= self.limit


@dataclass
class RunResult:
    """Table rows, metric summary and gates produced by one scenario run."""

    columns: list
    rows: list = field(default_factory=list)
    metrics: dict = field(default_factory=dict)
    gates: list = field(default_factory=list)

    def gate(
        self, name: str, value: float, limit: Optional[float], at_least: bool = False
    ) -> None:
        """Record `value` against `limit`; a None limit only reports the value."""
        self.metrics[name] = value
        if limit is not None:
            self.gates.append(Gate(name, value, limit, at_least))

    @property
    def failed_gates(self) -> list:
        return [gate for gate in self.gates if not gate.passed]


Runner = Callable[[Scenario], RunResult]


class RunnerRegistry:
    """Scenario runners keyed by scenario kind, filled in by the extensions."""

    def __init__(self):
        self.runners: dict = {}

    def add_runner(self, kind: str, runner: Runner) -> None:
        """Add a runner and log it."""
        self.runners[kind] = runner
        log.info(f"Runner loaded: {kind}")

    def remove_runner(self, kind: str) -> None:
        """Remove a runner and log it."""
        del self.runners[kind]
        log.info(f"Runner unloaded: {kind}")

    def load_extensions(self) -> None:
        """Import every module in `frackin.exts` and call its `setup`."""
        for file in sorted(EXTENSIONS_DIR.iterdir()):
            if file.suffix == ".py" and not file.name.startswith("_"):
                module = importlib.import_module(f"frackin.exts.{file.stem}")
                module.setup(self)

    def get(self, kind: str) -> Runner:
        try:
            return self.runners[kind]
        except KeyError:
            raise ScenarioValidationError(
                "scenario.kind",
                f"no runner for `{kind}`",
                suggest(kind, list(self.runners)),
            ) from None


def default_registry() -> RunnerRegistry:
    registry = RunnerRegistry()
    registry.load_extensions()
    return registry


def output_path(scenario: Scenario, out_dir: Optional[str] = None) -> Path:
    """CSV path of a scenario: `--out-dir`, then the scenario, then the config."""
    output = scenario.section("output")
    directory = out_dir or output["directory"] or Output.out_dir
    return Path(directory) / f"{output['stem'] or scenario.name}.csv"


def run(
    scenario: Scenario,
    registry: Optional[RunnerRegistry] = None,
    out_dir: Optional[str] = None,
    seed: Optional[int] = None,
) -> RunResult:
    """
    Run one scenario, write its table and sidecar, then enforce its gates.

    Artifacts are written even when a gate fails, so the failing numbers can
    be inspected; the failure is raised afterwards.
    """
    registry = registry or default_registry()
    runner = registry.get(scenario.kind)
    log.info(f"Running scenario `{scenario.name}` ({scenario.kind})")
    try:
        result = runner(scenario)
    except FrackinError as e:
        log.error(f"Scenario `{scenario.name}` failed: {e}")
        raise

    emit_table(
        result.rows,
        result.columns,
        output_path(scenario, out_dir),
        scenario=scenario.to_dict(),
        metrics=result.metrics,
        seed=scenario.seed if seed is None else seed,
    )
    for gate in result.failed_gates:
        relation = ">=" if gate.at_least else "<="
        log.error(
            f"Gate `{gate.name}` failed in `{scenario.name}`: {gate.value:.6g} is not "
            + f"{relation} {gate.limit:.6g}"
        )
    if result.failed_gates:
        names = ", ".join(gate.name for gate in result.failed_gates)
        raise GateFailure(f"scenario `{scenario.name}` failed gates: {names}")
    return result


def sweep(
    scenario: Scenario,
    registry: Optional[RunnerRegistry] = None,
    out_dir: Optional[str] = None,
    threads: Optional[int] = None,
    seed: Optional[int] = None,
) -> list:
    """
    Run every point of the scenario's sweep on a thread pool.

    Each point writes its own artifacts. Returns `(scenario, result or error)`
    pairs in sweep order; errors are collected instead of stopping the sweep.
    """
    registry = registry or default_registry()
    points = expand_sweep(scenario)
    workers = threads or Runtime.threads
    log.info(f"Sweeping {len(points)} scenarios on {workers} threads")

    def run_point(point: Scenario) -> object:
        try:
            return run(point, registry, out_dir, seed)
        except FrackinError as e:
            return e

    with ThreadPoolExecutor(max_workers=workers) as pool:
        outcomes = list(pool.map(run_point, points))
    return list(zip(points, outcomes))
