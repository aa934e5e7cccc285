"""Exception hierarchy.

Every error carries the CLI exit code of its family so the command line
driver can map failures without a lookup table.
"""


class CpsimError(Exception):
    exit_code = 1


class ConfigError(CpsimError, ValueError):
    exit_code = 2


class DataError(CpsimError, ValueError):
    exit_code = 3


class NumericalError(CpsimError, ArithmeticError):
    exit_code = 4


# density
class EmptySupport(DataError):
    pass


class NonIncreasingGrid(DataError):
    pass


class NegativeMass(DataError):
    pass


class ZeroTotalMass(DataError):
    pass


class NonFiniteInput(DataError):
    pass


class QuantileOutOfRange(DataError):
    pass


class InvalidOrder(ConfigError):
    pass


# sets
class DuplicatePoint(DataError):
    pass


class OverlappingSupports(DataError):
    pass


class EmptyMemberSet(DataError):
    pass


class EmptyCollection(DataError):
    pass


# change point sampler
class SegmentTooShort(DataError):
    pass


class SeriesTooShort(DataError):
    pass


class NoSplittableSegment(NumericalError):
    pass


class NoRemovableChangePoint(NumericalError):
    pass


class EmptyPosterior(DataError):
    pass


# matrices
class TooFewSeries(DataError):
    pass


# market data
class NonPositivePrice(DataError):
    pass


class WindowTooShort(DataError):
    pass


class ZeroVarianceSeries(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class UnsortedDates(DataError):
    pass
