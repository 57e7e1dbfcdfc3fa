"""Exception hierarchy.

Every error raised by the library derives from :class:`PrivMechError`. The
``exit_code`` class attribute is what the command line maps the error to.
"""


class PrivMechError(Exception):
    exit_code = 4


class ConfigError(PrivMechError):
    exit_code = 2


class OutOfScope(PrivMechError):
    """Instance is valid input but cannot be handled by the requested solver."""

    exit_code = 3


class NumericalInconsistency(PrivMechError):
    exit_code = 4


# probkit
class InvalidDistribution(PrivMechError, ValueError):
    exit_code = 2


class DimensionMismatch(PrivMechError, ValueError):
    exit_code = 2


class MarginalMismatch(PrivMechError, ValueError):
    pass


class ZeroReference(PrivMechError, ValueError):
    pass


# rowspace
class RankDeficient(OutOfScope):
    pass


class HeadSingular(OutOfScope):
    pass


class NegativeEntry(PrivMechError, ValueError):
    pass


class NoFeasibleOmega(OutOfScope):
    pass


# entcoef
class ZeroBasePoint(OutOfScope):
    pass


# lp
class Infeasible(PrivMechError):
    exit_code = 3


class Unbounded(PrivMechError):
    pass


class NotInHxy(OutOfScope):
    pass


class NoFeasibleCombination(PrivMechError):
    pass


class CombinationCapExceeded(OutOfScope):
    pass


# invsolver
class NotSquare(OutOfScope):
    pass


class Singular(OutOfScope):
    pass


# oracle
class TooLarge(OutOfScope):
    pass


# metrics
class MissingValues(OutOfScope):
    pass


class NotBinary(OutOfScope):
    pass


class NotZeroMean(OutOfScope):
    pass


class InvalidEta(OutOfScope):
    pass


class EpsilonRangeWarning(UserWarning):
    """Leakage is outside the range where the first-order expansion is guaranteed."""
