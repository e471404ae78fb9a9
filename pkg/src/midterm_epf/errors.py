"""Exception hierarchy.

Every error carries a module-qualified ``code`` (``"ingest.StaleQuote"``) that the
CLI prints verbatim, so messages stay greppable across subcommands.
"""


class EpfError(Exception):
    """Base class for user-facing (data or configuration) errors."""

    module = "epf"

    @property
    def code(self) -> str:
        return f"{self.module}.{type(self).__name__}"

    def __str__(self) -> str:
        msg = super().__str__()
        return f"[{self.code}] {msg}" if msg else f"[{self.code}]"


# ingest
class IngestError(EpfError):
    module = "ingest"


class EmptyInput(IngestError):
    pass


class MalformedRow(IngestError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnknownColumn(IngestError):
    pass


class DuplicateRow(IngestError):
    pass


class MissingData(IngestError):
    pass


class InvalidMaturity(IngestError):
    pass


class NonPositiveSettle(IngestError):
    pass


class StaleQuote(IngestError):
    pass


# fundamentals
class FundamentalsError(EpfError):
    module = "fundamentals"


class DivisionByZero(FundamentalsError):
    pass


class Scarcity(FundamentalsError):
    pass


class EmptyTable(FundamentalsError):
    pass


# solver
class SolverError(EpfError):
    module = "solver"


class DegenerateResponse(SolverError):
    pass


# seasonal
class SeasonalError(EpfError):
    module = "seasonal"


class SingularFit(SeasonalError):
    pass


class InsufficientSpan(SeasonalError):
    pass


class BasisError(SeasonalError):
    pass


# features / models
class FeatureError(EpfError):
    module = "features"


class InsufficientHistory(FeatureError):
    pass


class MissingSeasonalModel(FeatureError):
    pass


class ModelError(EpfError):
    module = "models"


class UnknownModel(ModelError):
    pass


# eval
class EvalError(EpfError):
    module = "eval"


class EmptyGroup(EvalError):
    pass


class DegenerateVariance(EvalError):
    pass


class SingularRegression(EvalError):
    pass


class EmptyPlotInput(EvalError):
    pass


# config / cli
class ConfigError(EpfError):
    module = "cli"
