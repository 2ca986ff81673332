"""Exception types shared across the toolkit.

Each family maps onto one CLI exit code (see ``trendcast.cli``).
"""


class TrendcastError(Exception):
    exit_code = 1


class ArgumentError(TrendcastError, ValueError):
    exit_code = 2


class ParseError(TrendcastError, ValueError):
    exit_code = 3

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class AlignmentError(TrendcastError, ValueError):
    exit_code = 3


class ModelError(TrendcastError):
    exit_code = 4


class ModelDomainError(ModelError, ValueError):
    pass


class SingularDesignError(ModelError, ValueError):
    def __init__(self, message, columns=()):
        self.columns = tuple(columns)
        super().__init__(message)


class UndefinedCorrelationError(ModelError, ValueError):
    pass


class EmptySelectionError(ModelError):
    pass


class InsufficientDataError(ModelError, ValueError):
    pass


class ShapeError(ModelError, ValueError):
    pass


class TrainingError(ModelError, RuntimeError):
    def __init__(self, message, epoch=None):
        self.epoch = epoch
        super().__init__(message)


class ProtocolError(TrendcastError):
    exit_code = 5


class StorageError(TrendcastError, OSError):
    exit_code = 6


class FetchError(TrendcastError):
    exit_code = 7


class HttpStatusError(FetchError):
    def __init__(self, status, url):
        self.status = status
        self.url = url
        super().__init__(f"HTTP {status} from {url}")


class QuotaError(HttpStatusError):
    pass


class SchemaError(FetchError):
    pass


class OfflineError(FetchError):
    pass
