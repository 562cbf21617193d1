"""Exception hierarchy.

Every error carries the module that raised it and a short machine-readable
kind, so the CLI can print ``ERROR:<module>:<kind>: message``.
"""

from __future__ import annotations


class AvrisoError(Exception):
    module = "avriso"
    kind = "error"

    def __init__(self, message: str, *, module: str | None = None):
        super().__init__(message)
        if module is not None:
            self.module = module

    def tag(self) -> str:
        return f"ERROR:{self.module}:{self.kind}: {self}"


class DomainError(AvrisoError, ValueError):
    kind = "domain"


class DegenerateError(AvrisoError, ValueError):
    kind = "degenerate"


class InversionError(AvrisoError, ValueError):
    kind = "inversion"


class RegimeError(AvrisoError, ValueError):
    kind = "regime"


class GateError(AvrisoError, ValueError):
    kind = "gate"


class StrictConvexityError(AvrisoError, ValueError):
    kind = "strictness"


class InfeasibleError(AvrisoError, RuntimeError):
    kind = "infeasible"


class NonconvergenceError(AvrisoError, RuntimeError):
    kind = "nonconvergence"


class ConfigError(AvrisoError, ValueError):
    module = "cli"
    kind = "config"
