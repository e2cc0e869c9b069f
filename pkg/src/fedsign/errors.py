"""Exception hierarchy shared across the package.

Errors are grouped so the CLI can map them to distinct exit codes:
ConfigError -> 2, DataError -> 3, anything else under FedSignError -> 4.
"""


class FedSignError(Exception):
    """Base class for all package errors."""


class ConfigError(FedSignError):
    """Invalid experiment or protocol configuration."""


# --- data ingestion / preparation ---

class DataError(FedSignError):
    """Base class for dataset ingestion and preparation errors."""


class MalformedRow(DataError):
    def __init__(self, line_no, detail=""):
        self.line_no = line_no
        super().__init__(f"malformed CSV row at line {line_no}: {detail}")


class EmptyResult(DataError):
    pass


class NonMonotonicTimestamps(DataError):
    def __init__(self, customer_id):
        self.customer_id = customer_id
        super().__init__(f"timestamps not strictly increasing for customer {customer_id!r}")


class IrregularSampling(DataError):
    def __init__(self, customer_id):
        self.customer_id = customer_id
        super().__init__(f"sampling step is not a constant 30 minutes for customer {customer_id!r}")


class SeriesTooShort(DataError):
    pass


class ZeroVariance(DataError):
    pass


class DegenerateSplit(DataError):
    pass


class TooFewSamples(DataError):
    pass


# --- numeric / vector ---

class DimensionMismatch(FedSignError):
    pass


class EmptyUpdateSet(FedSignError):
    pass


# --- privacy ---

class BudgetOutOfRange(FedSignError):
    pass


# --- crypto ---

class PlaintextOutOfRange(FedSignError):
    pass


class KeyMismatch(FedSignError):
    pass


class MagnitudeOverflow(FedSignError):
    pass


# --- adversaries ---

class RoleMismatch(FedSignError):
    pass


# --- metrics / bounds ---

class LengthMismatch(FedSignError):
    pass


class AllTargetsZero(FedSignError):
    pass


class PreconditionUnsatisfied(FedSignError):
    def __init__(self, condition):
        self.condition = condition
        super().__init__(f"precondition violated: {condition}")
