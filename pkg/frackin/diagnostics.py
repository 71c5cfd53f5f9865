import logging
import math
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Optional

from frackin.errors import DomainError

log = logging.getLogger(__name__)

BASE_COLUMNS = ("time", "plain_mass", "fractional_mass", "min_value", "l2_norm")


@dataclass(frozen=True)
class DiagnosticsRecord:
    """Scalar diagnostics of a state at one instant, plus named metrics."""

    time: float
    plain_mass: Optional[float] = None
    fractional_mass: Optional[float] = None
    min_value: Optional[float] = None
    l2_norm: Optional[float] = None
    metrics: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "metrics", dict(self.metrics))
        for name, value in self.items():
            if value is not None and not math.isfinite(value):
                raise DomainError(f"diagnostic `{name}` is not finite: {value}")

    def items(self) -> Iterator[tuple]:
        """Yield every (name, value) pair, base fields first."""
        for name in BASE_COLUMNS:
            yield name, getattr(self, name)
        yield from self.metrics.items()


class Diagnostics:
    """Time-ordered series of `DiagnosticsRecord`s."""

    def __init__(self):
        self.records: list[DiagnosticsRecord] = []

    def append(self, record: DiagnosticsRecord) -> None:
        if self.records and record.time < self.records[-1].time:
            raise DomainError(
                f"diagnostic time {record.time} precedes {self.records[-1].time}"
            )
        log.trace(f"Diagnostics at t={record.time}: {dict(record.items())}")
        self.records.append(record)

    def __iter__(self) -> Iterator[DiagnosticsRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __getitem__(self, index: int) -> DiagnosticsRecord:
        return self.records[index]

    @property
    def last(self) -> DiagnosticsRecord:
        return self.records[-1]

    def columns(self) -> list[str]:
        """Base columns followed by every metric name, in first-seen order."""
        names = dict.fromkeys(BASE_COLUMNS)
        for record in self.records:
            names.update(dict.fromkeys(record.metrics))
        return list(names)

    def rows(self) -> list[list]:
        """Rows aligned with `columns()`; absent values are None."""
        columns = self.columns()
        return [[dict(record.items()).get(name) for name in columns] for record in self]

    def drift(self, name: str) -> float:
        """Largest absolute departure of a column from its first value."""
        values = [dict(record.items())[name] for record in self]
        if not values or values[0] is None:
            return math.nan
        return max(abs(value - values[0]) for value in values)
