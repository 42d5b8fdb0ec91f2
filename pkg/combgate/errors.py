"""
Error hierarchy shared by the library, the CLI and the HTTP routes.

Every failure carries a machine-readable category so the outer layers can
translate it without inspecting messages:

    config   -> bad input files, bad configuration values   (exit code 1, HTTP 400)
    physics  -> inputs are valid but the requested operation is physically
                meaningless, e.g. a non-positive differential phase  (exit 2, HTTP 422)
    numerics -> quadrature / integrator failures, cutoff violations  (exit 2, HTTP 500)
"""
from typing import Iterable, Optional


class CombGateError(Exception):
    category = "numerics"
    exit_code = 2

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message

    def to_dict(self) -> dict:
        return {"error": {"category": self.category, "message": self.message}}


class ConfigError(CombGateError):
    category = "config"
    exit_code = 1


class LevelSchemeError(ConfigError):
    """Raised while parsing or validating a level-scheme file."""

    def __init__(self, message: str, labels: Optional[Iterable[str]] = None):
        self.labels = tuple(labels or ())
        if self.labels:
            message = f"{message} [levels: {', '.join(self.labels)}]"
        super().__init__(message)


class PhysicsError(CombGateError):
    category = "physics"
    exit_code = 2


class NumericsError(CombGateError):
    category = "numerics"
    exit_code = 2
