"""Exception types raised by the membrane package.

Every error raised on a user-facing path derives from MembraneError so
callers (and the CLI) can distinguish configuration mistakes from
numerical failures.
"""


class MembraneError(Exception):
    """Base class for all package errors."""


class ConfigError(MembraneError):
    """Invalid or incomplete run/study configuration."""


class MeshError(MembraneError):
    """Mesh construction, validation, or file parsing failure."""


class MaterialError(MembraneError):
    """Invalid material parameters or elastic matrix."""


class ElementError(MembraneError):
    """Per-element kernel failure (degenerate geometry etc.).

    Carries the offending triangle id when known; -1 means "not tied to
    a mesh element" (stand-alone coordinate input).
    """

    def __init__(self, message: str, element_id: int = -1):
        super().__init__(message)
        self.element_id = element_id


class AssemblyError(MembraneError):
    """Global system assembly or constraint application failure."""


class SolverError(MembraneError):
    """Numerical failure in factorization or time integration."""
