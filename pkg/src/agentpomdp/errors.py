"""Exception types and capacity limits shared across the package."""

import os


class AgentPomdpError(Exception):
    """Base class for all package errors."""


class ValidationError(AgentPomdpError):
    """Input data violates a documented contract (bad index, bad distribution, ...)."""


class CapacityError(AgentPomdpError):
    """Problem size exceeds the configured capacity cap."""


class ImpossibleObservationError(AgentPomdpError):
    """A belief update was asked to condition on a zero-probability observation."""


class AmbiguousChainError(AgentPomdpError):
    """More than one closed communicating class is reachable; the stationary
    distribution depends on which one is entered."""

    def __init__(self, classes):
        self.classes = [sorted(c) for c in classes]
        super().__init__(
            f"{len(self.classes)} closed classes reachable: {self.classes}"
        )


class UnsupportedFeatureError(AgentPomdpError):
    """A construct outside the supported input subset was encountered."""


class ParseError(AgentPomdpError):
    """Text input could not be parsed; carries the 1-based line (and column
    when identifiable)."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", col {column}" if column is not None else "") + ")"
        super().__init__(message + loc)


def capacity_cap(default: int) -> int:
    """Capacity cap for enumeration-style operations.

    The AGENTPOMDP_CAP environment variable, when set, overrides every
    default cap in the package.
    """
    raw = os.environ.get("AGENTPOMDP_CAP")
    if raw is None or raw == "":
        return default
    try:
        return int(raw)
    except ValueError as exc:
        raise ValidationError(f"AGENTPOMDP_CAP must be an integer, got {raw!r}") from exc
