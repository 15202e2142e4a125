"""Exception types shared across the toolkit."""


class TenspineError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(TenspineError, ValueError):
    """A caller-supplied parameter violates its documented constraints."""


class TopologyError(TenspineError, ValueError):
    """Structure generation parameters are invalid (bad n, m, or dimensions)."""


class SolvabilityError(TenspineError):
    """The linear equilibrium system is singular.

    ``nodes`` names the offending free nodes (zero-stiffness rows or an
    under-anchored rigid-body mode).
    """

    def __init__(self, message, nodes=()):
        super().__init__(message)
        self.nodes = tuple(nodes)


class DivergenceError(TenspineError):
    """An iterative solve failed to converge; ``trace`` holds per-iteration data."""

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class IntegrationError(TenspineError):
    """Time integration went unstable (NaN or runaway positions).

    ``last_stable_step`` is the step count before the blow-up was detected.
    """

    def __init__(self, message, last_stable_step=0):
        super().__init__(message)
        self.last_stable_step = last_stable_step


class ReachabilityError(TenspineError, ValueError):
    """Requested pose lies outside the configured bend limit."""


class SweepError(TenspineError):
    """A workspace sweep produced no usable samples."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class LogIntegrityError(TenspineError, ValueError):
    """An exploration log violates its ordering invariants."""


class ModelFileError(TenspineError, ValueError):
    """Base for model-file load failures."""


class VersionError(ModelFileError):
    """Unrecognised format_version; nothing was loaded."""


class SchemaError(ModelFileError):
    """File structure does not match the documented schema."""


class DanglingReferenceError(ModelFileError):
    """A stored member references a node that does not exist."""
