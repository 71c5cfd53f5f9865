import json
import logging
import os
from pathlib import Path

log = logging.getLogger(__name__)

_DEFAULT_CONFIG = Path(__file__).resolve().parent.parent / "config-default.json"

if Path("config.json").exists():
    log.info("Found `config.json`, loading constants from it.")
    with open("config.json", "r") as f:
        _CONFIG_JSON = json.load(f)
else:
    with open(_DEFAULT_CONFIG, "r") as f:
        _CONFIG_JSON = json.load(f)


class JSONGetter(type):
    """
    Metaclass that exposes configuration data as class attributes.

    Supports getting configuration from up to two levels
    of nested configuration through `section` and `subsection`.

    Example Usage:
        # config.json
        {
            "numerics": {
                "quadrature_limit": 2000
            }
        }

        # constants.py
        class Numerics(metaclass=JSONGetter):
            section = "numerics"

            quadrature_limit: int

        # Usage in Python code
        from frackin.constants import Numerics
        quad(f, 0, cutoff, limit=Numerics.quadrature_limit)
    """

    subsection = None

    def __getattr__(cls, name: str):
        name = name.lower()

        try:
            if cls.subsection is not None:
                return _CONFIG_JSON[cls.section][cls.subsection][name]
            return _CONFIG_JSON[cls.section][name]
        except KeyError:
            dotted_path = ".".join(
                (cls.section, cls.subsection, name)
                if cls.subsection is not None
                else (cls.section, name)
            )
            log.critical(
                f"Tried accessing configuration variable at `{dotted_path}`, "
                + "but it could not be found."
            )
            raise

    def __getitem__(cls, name: str):
        return cls.__getattr__(name)

    def __iter__(cls):
        """Yield `(name, value)` pairs for every annotated constant."""
        for name in cls.__annotations__:
            yield name, getattr(cls, name)


# Debug mode
DEBUG_MODE = os.environ.get("FRACKIN_DEBUG", "").strip().lower() in {
    "1",
    "true",
    "yes",
    "on",
}


# JSON constants
class Numerics(metaclass=JSONGetter):
    """Tolerances and limits of the numerical kernels."""

    section = "numerics"

    gamma_max_argument: float
    quadrature_cutoff: float
    quadrature_epsabs: float
    quadrature_epsrel: float
    quadrature_limit: int
    series_term_tolerance: float
    series_max_terms: int
    series_guard_digits: int
    leibniz_degree_tolerance: float
    terminal_tolerance: float


class Gates(metaclass=JSONGetter):
    """Thresholds of the precondition gates."""

    section = "gates"

    boundary_tolerance: float
    stability_factor: float
    symmetry_tolerance: float


class Output(metaclass=JSONGetter):
    """Where and how artifacts are written."""

    section = "output"

    out_dir: str
    float_digits: int


class Runtime(metaclass=JSONGetter):
    """Worker pool settings."""

    section = "runtime"

    threads: int


class LogConfig(metaclass=JSONGetter):
    """Log file settings."""

    section = "logging"

    log_file: str
    max_bytes: int
    backup_count: int
