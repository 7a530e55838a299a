"""Exception taxonomy shared across the package.

Three failure classes map onto the CLI exit codes: bad inputs (exit 2),
numerical solver breakdown (exit 3), and algorithm-level failure such as an
outlier-removal loop discarding every observation (also exit 3).
"""


class InvalidArgumentError(ValueError):
    """Inputs violate a documented precondition."""


class SolverFailureError(RuntimeError):
    """A numerical backend failed to produce a certified solution."""


class AlgorithmFailureError(RuntimeError):
    """An iterative procedure reached an unrecoverable state."""
