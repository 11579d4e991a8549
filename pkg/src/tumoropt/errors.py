"""Exception types shared across the package."""


class TumoroptError(Exception):
    """Base class for all package errors."""


class ConfigError(TumoroptError):
    """Invalid or unreadable experiment configuration."""


class MeshFormatError(TumoroptError):
    """Mesh file could not be parsed; carries the offending line number."""

    def __init__(self, message, path=None, line=None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f" [{path}" + (f":{line}]" if line is not None else "]")
        super().__init__(message + where)


class MeshValidationError(TumoroptError):
    """Parsed mesh violates a structural invariant (indices, conformity, area)."""


class NumericError(TumoroptError):
    """Non-finite value encountered during assembly or evaluation."""


class SolverError(TumoroptError):
    """Linear solve failed to reach the residual target."""

    def __init__(self, message, residual=None):
        self.residual = residual
        if residual is not None:
            message = f"{message} (achieved relative residual {residual:.3e})"
        super().__init__(message)


class SteppingError(TumoroptError):
    """Time stepping failed; carries the step index."""

    def __init__(self, message, step):
        self.step = step
        super().__init__(f"step {step}: {message}")


class OptimizationError(TumoroptError):
    """Descent loop failed; carries iteration index and partial history."""

    def __init__(self, message, iteration, history):
        self.iteration = iteration
        self.history = history
        super().__init__(f"iteration {iteration}: {message}")


class RunnerError(TumoroptError):
    """Experiment runner I/O failure; carries the path involved."""

    def __init__(self, message, path):
        self.path = path
        super().__init__(f"{message}: {path}")
