import copy
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Optional

from frackin.errors import ScenarioParseError, ScenarioValidationError
from frackin.registry import SLOTS, rules, suggest

log = logging.getLogger(__name__)

KINDS = (
    "levy-table",
    "liouville",
    "bogoliubov-residual",
    "vlasov",
    "kinetic-linear",
    "convergence-sweep",
)

REQUIRED = object()


@dataclass(frozen=True)
class Key:
    """Schema entry: value type, default and an optional extra check."""

    kind: str
    default: Any = None
    choices: Optional[tuple] = None
    check: Optional[Callable[[Any], Optional[str]]] = None


def _positive(value: float) -> Optional[str]:
    return None if value > 0 else "must be positive"


def _non_negative(value: float) -> Optional[str]:
    return None if value >= 0 else "must not be negative"


def _at_least(bound: int) -> Callable[[int], Optional[str]]:
    return lambda value: None if value >= bound else f"must be at least {bound}"


def _alpha(value: float) -> Optional[str]:
    return None if 0 < value <= 2 else "must lie in (0, 2]"


def _all_positive(values: list) -> Optional[str]:
    return None if all(v > 0 for v in values) else "entries must be positive"


def _axis(value: int) -> Optional[str]:
    return None if 1 <= value <= 3 else "must be 1, 2 or 3"


SCHEMA = {
    "scenario": {
        "kind": Key("str", REQUIRED, choices=KINDS),
        "alpha": Key("float", REQUIRED, check=_alpha),
        "name": Key("str", None),
        "seed": Key("int", 0, check=_non_negative),
    },
    "grid": {
        "degrees_of_freedom": Key("int", 1, check=_axis),
        "q_lower": Key("float", -8.0),
        "q_h": Key("float", 0.25, check=_positive),
        "q_count": Key("int", 64, check=_at_least(3)),
        "p_lower": Key("float", -8.0),
        "p_h": Key("float", 0.25, check=_positive),
        "p_count": Key("int", 64, check=_at_least(3)),
    },
    "rules": {
        slot: Key("str", "zero" if slot != "initial" else "gaussian")
        for slot in SLOTS
    },
    "physics": {
        "mass": Key("float", 1.0, check=_positive),
        "charge": Key("float", 1.0),
        "light_speed": Key("float", 1.0, check=_positive),
        "omega": Key("float", 1.0, check=_positive),
        "kappa": Key("float", 0.1),
        "e_field": Key("float", 0.0),
        "e_axis": Key("int", 1, check=_axis),
        "b_field": Key("float", 0.0),
        "b_axis": Key("int", 3, check=_axis),
        "temperature": Key("float", 1.0, check=_positive),
        "transport": Key("float", 1.0, check=_positive),
        "particles": Key("int", 2, check=_at_least(1)),
        "q0": Key("float", 0.0),
        "p0": Key("float", 0.0),
        "sigma": Key("float", 1.0, check=_positive),
    },
    "stepping": {
        "dt": Key("float", 0.01, check=_positive),
        "steps": Key("int", 0, check=_non_negative),
        "stride": Key("int", 1, check=_at_least(1)),
        "solver": Key(
            "str", "riesz-spectral", choices=("caputo-grid", "riesz-spectral")
        ),
        "form": Key(
            "str", "auto", choices=("auto", "bracket", "continuity", "advective")
        ),
    },
    "table": {
        "x_min": Key("float", -10.0),
        "x_max": Key("float", 10.0),
        "x_step": Key("float", 0.1, check=_positive),
        "method": Key("str", "integral", choices=("integral", "series")),
        "tail_points": Key("floats", [], check=_all_positive),
    },
    "convergence": {
        "target": Key(
            "str", "caputo-monomial", choices=("caputo-monomial", "bogoliubov-residual")
        ),
        "beta": Key("float", 3.0, check=_positive),
        "x": Key("float", 1.0, check=_positive),
        "counts": Key("ints", [250, 500, 1000], check=_all_positive),
    },
    "sweep": {
        "parameter": Key("str", None),
        "values": Key("values", []),
    },
    "output": {
        "directory": Key("str", None),
        "stem": Key("str", None),
    },
    "tolerances": {
        "max_error": Key("float", None, check=_positive),
        "profile_error": Key("float", None, check=_positive),
        "mass_drift": Key("float", None, check=_positive),
        "residual": Key("float", None, check=_positive),
        "exponent_error": Key("float", None, check=_positive),
        "min_ratio": Key("float", None, check=_positive),
    },
}


def _is_number(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool)


def _coerce(name: str, key: Key, value: Any) -> Any:
    """Check `value` against the key's type; ints are accepted for floats."""
    if key.kind == "float" and _is_number(value):
        value = float(value)
        if not math.isfinite(value):
            raise ScenarioValidationError(name, "must be finite")
        return value
    if key.kind == "int" and isinstance(value, int) and not isinstance(value, bool):
        return value
    if key.kind == "str" and isinstance(value, str):
        return value
    if key.kind in ("floats", "ints", "values") and isinstance(value, list):
        if key.kind == "values":
            if not all(_is_number(v) or isinstance(v, str) for v in value):
                raise ScenarioValidationError(name, "sweep values must be scalars")
            return list(value)
        element = Key("float" if key.kind == "floats" else "int")
        return [_coerce(f"{name}[{i}]", element, v) for i, v in enumerate(value)]
    raise ScenarioValidationError(
        name, f"expected {key.kind}, got {type(value).__name__}"
    )


def _validate_value(name: str, key: Key, value: Any) -> Any:
    if value is None:
        if key.default is None:
            return None
        raise ScenarioValidationError(name, "must not be null")
    value = _coerce(name, key, value)
    if key.choices is not None and value not in key.choices:
        raise ScenarioValidationError(
            name,
            f"`{value}` is not one of {', '.join(key.choices)}",
            suggest(value, list(key.choices)),
        )
    if key.check is not None:
        problem = key.check(value)
        if problem:
            raise ScenarioValidationError(name, f"{problem}, got {value}")
    return value


def _unknown_key(name: str, choices: list) -> ScenarioValidationError:
    leaf = name.rsplit(".", 1)[-1]
    return ScenarioValidationError(name, "unknown key", suggest(leaf, choices))


class Scenario:
    """A validated scenario with every default filled in."""

    def __init__(self, sections: dict):
        self._sections = sections

    @property
    def kind(self) -> str:
        return self._sections["scenario"]["kind"]

    @property
    def alpha(self) -> float:
        return self._sections["scenario"]["alpha"]

    @property
    def name(self) -> str:
        return self._sections["scenario"]["name"] or self.kind

    @property
    def seed(self) -> int:
        return self._sections["scenario"]["seed"]

    def section(self, name: str) -> dict:
        """Copy of one resolved section."""
        return dict(self._sections[name])

    def get(self, dotted: str) -> Any:
        section, key = dotted.split(".", 1)
        return self._sections[section][key]

    def to_dict(self) -> dict:
        """The fully resolved document, defaults included."""
        return copy.deepcopy(self._sections)

    def replace(self, dotted: str, value: Any) -> "Scenario":
        """Validated copy with one key changed."""
        document = self.to_dict()
        section, key = _split_key(dotted)
        document[section][key] = value
        return validate(document)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Scenario) and self._sections == other._sections

    def __repr__(self) -> str:
        return f"Scenario(kind={self.kind!r}, name={self.name!r})"


def _split_key(dotted: str) -> tuple:
    section, _, key = dotted.partition(".")
    if section not in SCHEMA:
        raise _unknown_key(section, list(SCHEMA))
    if key not in SCHEMA[section]:
        raise _unknown_key(f"{section}.{key}", list(SCHEMA[section]))
    return section, key


def validate(document: Any) -> Scenario:
    """Validate a decoded document and fill in defaults."""
    if not isinstance(document, dict):
        raise ScenarioValidationError("<document>", "a scenario must be an object")

    resolved = {}
    for section, keys in SCHEMA.items():
        given = document.get(section, {})
        if not isinstance(given, dict):
            raise ScenarioValidationError(section, "a section must be an object")
        resolved[section] = {}
        for name, key in keys.items():
            dotted = f"{section}.{name}"
            if name not in given:
                if key.default is REQUIRED:
                    raise ScenarioValidationError(dotted, "is required")
                resolved[section][name] = copy.deepcopy(key.default)
                continue
            resolved[section][name] = _validate_value(dotted, key, given[name])
        for name in given:
            if name not in keys:
                raise _unknown_key(f"{section}.{name}", list(keys))
    for section in document:
        if section not in SCHEMA:
            raise _unknown_key(section, list(SCHEMA))

    for slot, name in resolved["rules"].items():
        rules.resolve(slot, name)
    _validate_sweep(resolved["sweep"])
    if resolved["table"]["x_max"] < resolved["table"]["x_min"]:
        raise ScenarioValidationError("table.x_max", "must not be below table.x_min")

    return Scenario(resolved)


def _validate_sweep(sweep: dict) -> None:
    parameter = sweep["parameter"]
    if parameter is None:
        if sweep["values"]:
            raise ScenarioValidationError("sweep.parameter", "is required with values")
        return
    try:
        section, _ = _split_key(parameter)
    except ScenarioValidationError as error:
        raise ScenarioValidationError(
            "sweep.parameter", f"`{parameter}` is not a scenario key", error.suggestion
        ) from None
    if section == "sweep":
        raise ScenarioValidationError("sweep.parameter", "cannot sweep the sweep")


def parse_scenario(text: str) -> Scenario:
    """Parse and validate a JSON scenario document."""
    try:
        document = json.loads(text)
    except json.JSONDecodeError as error:
        raise ScenarioParseError(error.msg, error.lineno, error.colno) from None
    scenario = validate(document)
    log.debug(f"Parsed scenario `{scenario.name}` of kind {scenario.kind}")
    return scenario


def load_scenario(path: "str | Path") -> Scenario:
    """Read and parse a scenario file; the stem names the scenario by default."""
    path = Path(path)
    scenario = parse_scenario(path.read_text(encoding="utf-8"))
    if scenario.get("scenario.name") is None:
        scenario = scenario.replace("scenario.name", path.stem)
    log.info(f"Loaded scenario `{scenario.name}` from {path}")
    return scenario


def expand_sweep(scenario: Scenario) -> list:
    """One scenario per sweep value, named `<name>-<index>`; none without a sweep."""
    sweep = scenario.section("sweep")
    if sweep["parameter"] is None:
        return [scenario]
    expanded = []
    for index, value in enumerate(sweep["values"]):
        point = scenario.replace(sweep["parameter"], value)
        point = point.replace("scenario.name", f"{scenario.name}-{index}")
        point = point.replace("sweep.values", [])
        expanded.append(point.replace("sweep.parameter", None))
    return expanded
