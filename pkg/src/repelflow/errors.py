"""Failure taxonomy shared by the solvers and the command line front end.

Every error carries a short machine readable ``reason`` string; the CLI
prints it on a ``reason: ...`` line and maps the class to an exit code
(config 2, numerics 3, non-convergence 4).
"""


class SolverError(Exception):
    """Base class for anything the solvers can raise on purpose."""

    exit_code = 3
    default_reason = "solver error"

    def __init__(self, message, reason=None, **context):
        super().__init__(message)
        self.reason = reason or self.default_reason
        self.context = context


class ConfigError(SolverError):
    """Bad user input: config files, parameters, invalid potentials."""

    exit_code = 2
    default_reason = "invalid config"


class PotentialError(ConfigError):
    """Confinement fails a structural requirement (sign, tail, monotonicity)."""

    default_reason = "invalid potential"


class TailTooWeakError(PotentialError):
    """No support radius below the search cap: the tail cannot hold the mass."""

    default_reason = "tail too weak"


class NumericsError(SolverError):
    """Numerical failure during time stepping or quadrature."""

    exit_code = 3
    default_reason = "numerics failure"


class StiffnessError(NumericsError):
    """Adaptive step size fell below dt_min; context carries the state dump."""

    default_reason = "dt underflow"


class DivergenceError(NumericsError):
    """A trajectory left the trusted domain (positions past the blow-up guard)."""

    default_reason = "trajectory divergence"


class ResolutionError(NumericsError):
    """Grid refinement check failed to meet the accuracy target."""

    default_reason = "insufficient resolution"


class ConvergenceError(SolverError):
    """An iteration hit its budget without meeting the tolerance."""

    exit_code = 4
    default_reason = "did not converge"


class ResolutionWarning(UserWarning):
    """Cross-checked estimates disagree more than their quality gate."""
