import csv
import functools
import io
import json
import logging
import math
import os
import subprocess
import tempfile
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

from frackin.constants import Output
from frackin.errors import DomainError, OutputError

log = logging.getLogger(__name__)

PACKAGE_ROOT = Path(__file__).resolve().parent.parent


def format_cell(value: object) -> str:
    """Render one CSV cell; reals get `Output.float_digits` significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DomainError(f"cannot write the non-finite value {value}")
        if value == 0.0:
            return "0"
        return format(value, f".{Output.float_digits}g")
    return str(value)


def write_atomic(path: "str | Path", text: str) -> Path:
    """Write `text` through a temporary file renamed over `path`."""
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        handle, temp_name = tempfile.mkstemp(
            prefix=f".{path.name}.", suffix=".tmp", dir=path.parent
        )
        try:
            with os.fdopen(handle, "w", encoding="utf-8", newline="") as f:
                f.write(text)
            os.replace(temp_name, path)
        except BaseException:
            Path(temp_name).unlink(missing_ok=True)
            raise
    except OSError as e:
        raise OutputError(path, e.strerror or str(e)) from e
    log.trace(f"Wrote {len(text)} characters to {path}")
    return path


def render_table(rows: Iterable[Sequence], columns: Sequence[str]) -> str:
    """CSV text with one header row and `\\n` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for index, row in enumerate(rows):
        if len(row) != len(columns):
            raise DomainError(
                f"row {index} has {len(row)} cells for {len(columns)} columns"
            )
        writer.writerow([format_cell(value) for value in row])
    return buffer.getvalue()


@functools.lru_cache(maxsize=None)
def git_describe() -> str:
    """`git describe` of the source tree, or "unknown" outside a checkout."""
    try:
        c = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            capture_output=True,
            check=True,
            cwd=PACKAGE_ROOT,
            encoding="utf-8",
            timeout=10,
        )
    except (subprocess.TimeoutExpired, subprocess.SubprocessError, OSError) as e:
        log.debug(f"git describe failed: `{e}`")
        return "unknown"
    return c.stdout.strip() or "unknown"


def _json_value(value: object) -> object:
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def render_sidecar(
    scenario: Mapping,
    columns: Sequence[str],
    metrics: Mapping[str, object],
    seed: int,
) -> str:
    document = {
        "columns": list(columns),
        "git_describe": git_describe(),
        "metrics": {name: _json_value(value) for name, value in metrics.items()},
        "scenario": scenario,
        "seed": seed,
    }
    return json.dumps(document, indent=2, sort_keys=True, allow_nan=False) + "\n"


def emit_table(
    rows: Iterable[Sequence],
    columns: Sequence[str],
    path: "str | Path",
    scenario: Optional[Mapping] = None,
    metrics: Optional[Mapping[str, object]] = None,
    seed: int = 0,
) -> tuple:
    """
    Write `rows` as CSV to `path` and a JSON sidecar next to it.

    The sidecar echoes the resolved scenario, the `git describe` string, the
    metric summary, the columns and the seed. Returns both paths.
    """
    path = Path(path)
    table = write_atomic(path, render_table(rows, columns))
    sidecar = write_atomic(
        path.with_suffix(".json"),
        render_sidecar(scenario or {}, columns, metrics or {}, seed),
    )
    log.info(f"Wrote {table} and {sidecar.name}")
    return table, sidecar
