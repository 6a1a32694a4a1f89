"""Exception hierarchy.

Every error carries the process exit code the CLI maps it to, so the
library and the command line agree on failure classes.
"""


class NanomassError(Exception):
    exit_code = 3


class ConfigError(NanomassError, ValueError):
    exit_code = 2


class NumericalError(NanomassError, ArithmeticError):
    exit_code = 3


class NoConvergence(NumericalError):
    pass


class StepSizeUnderflow(NumericalError):
    pass


class DivergentSlope(NumericalError):
    """Raised at a fold point where dE/d(parameter) is infinite."""


class InconsistentRoot(NumericalError):
    pass


class NotBistable(NanomassError):
    exit_code = 4


class UnstableBranch(NanomassError):
    exit_code = 5


class SlowingDownDivergence(UnstableBranch):
    pass
