"""
Exception hierarchy for spectral_sbm.

Every failure raised by the package derives from SpectralSBMError so the CLI
can map it to an exit code in one place.
"""

from typing import Iterable, Optional


class SpectralSBMError(Exception):
    """Base class for all package errors."""


class ParameterError(SpectralSBMError, ValueError):
    """Invalid model or algorithm parameters (p <= q, k out of range, shape mismatch)."""


class ConvergenceError(SpectralSBMError, ArithmeticError):
    """An iterative numerical method did not reach its tolerance."""

    def __init__(self, matrix_name: str, residual: float, detail: str = ""):
        self.matrix_name = matrix_name
        self.residual = residual
        msg = f"no convergence for matrix '{matrix_name}' (residual {residual:.3e})"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class ResourceError(SpectralSBMError):
    """An exhaustive oracle would exceed one of its hard caps."""

    def __init__(self, cap_name: str, requested: int, limit: int):
        self.cap_name = cap_name
        self.requested = requested
        self.limit = limit
        super().__init__(f"{cap_name} exceeded: requested {requested}, limit {limit}")


class GraphFormatError(SpectralSBMError):
    """Malformed edge-list or labels file."""

    def __init__(self, path: str, line_no: Optional[int], message: str):
        self.path = path
        self.line_no = line_no
        where = f"{path}:{line_no}" if line_no is not None else path
        super().__init__(f"{where}: {message}")


class SpecError(SpectralSBMError):
    """Invalid experiment spec; ``fields`` lists every offending entry."""

    def __init__(self, problems: Iterable[str]):
        self.fields = list(problems)
        super().__init__("invalid experiment spec: " + "; ".join(self.fields))
