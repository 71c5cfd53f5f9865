class FrackinError(Exception):
    """Base class for every error raised by frackin."""


class DomainError(FrackinError, ValueError):
    """An argument lies outside the domain of the operation."""


class GammaOverflowError(FrackinError, OverflowError):
    """The gamma function would overflow a double."""


class GridError(FrackinError):
    """A grid is unusable for the requested operation."""


class GridTooSmallError(GridError):
    """The grid has too few nodes for the stencil."""


class TerminalError(GridError):
    """The grid does not start at the Caputo terminal x = 0."""


class GridMismatchError(GridError):
    """Two fields that must share a grid do not."""


class PowerOfTwoError(GridError):
    """A spectral operation was given a node count that is not a power of two."""


class NonConvergenceError(FrackinError):
    """A series or iteration did not reach its tolerance."""


class StabilityError(FrackinError):
    """The time step violates the advective stability bound."""


class NumericalInstabilityError(FrackinError):
    """A non-finite value appeared during time stepping."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite value detected at step {step}")


class GateFailure(FrackinError):
    """A precondition gate (boundary vanishing, tolerance threshold) failed."""


class LeibnizTruncationError(FrackinError):
    """The Leibniz series would be truncated before it terminates."""


class ScenarioError(FrackinError):
    """A scenario document could not be turned into a valid scenario."""


class ScenarioParseError(ScenarioError):
    """The scenario document is not well-formed."""

    def __init__(self, message: str, line: int, column: int):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")


class ScenarioValidationError(ScenarioError):
    """A scenario key is unknown or carries an invalid value."""

    def __init__(self, key: str, message: str, suggestion: "str | None" = None):
        self.key = key
        self.suggestion = suggestion
        hint = f"; did you mean `{suggestion}`?" if suggestion else ""
        super().__init__(f"`{key}`: {message}{hint}")


class UnknownRegistryNameError(ScenarioValidationError):
    """A scenario references a rule that is not in the registry."""


class OutputError(FrackinError):
    """An artifact could not be written."""

    def __init__(self, path: "str | object", reason: str):
        self.path = path
        super().__init__(f"could not write {path}: {reason}")
