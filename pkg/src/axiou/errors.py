"""Exception hierarchy shared by every module."""

from __future__ import annotations


class AxiouError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(AxiouError, ValueError):
    pass


class InvalidInterval(InvalidParameter):
    def __init__(self, message: str, query_id: str | None = None):
        super().__init__(message)
        self.query_id = query_id


class SpecParseError(InvalidParameter):
    def __init__(self, token: str, reason: str = "unknown measure family"):
        super().__init__(f"cannot parse measure spec {token!r}: {reason}")
        self.token = token


class InvalidInput(AxiouError, ValueError):
    pass


class EmptyQuerySet(AxiouError, ValueError):
    pass


class MissingAnnotation(AxiouError, LookupError):
    def __init__(self, query_id: str):
        super().__init__(f"no ground truth for query {query_id!r}")
        self.query_id = query_id


class MissingPrediction(AxiouError, LookupError):
    def __init__(self, query_id: str, system_id: str | None = None):
        where = f" in run {system_id!r}" if system_id is not None else ""
        super().__init__(f"no ranked list for query {query_id!r}{where}")
        self.query_id = query_id
        self.system_id = system_id


class Infeasible(AxiouError):
    """No perturbation of the requested kind exists for a relevance list."""


class UndefinedCorrelation(AxiouError, ArithmeticError):
    pass


class InsufficientQueries(AxiouError, ValueError):
    pass


class DegenerateAnnotation(AxiouError, ValueError):
    pass


class ParseError(AxiouError, ValueError):
    def __init__(self, path, line: int, reason: str):
        super().__init__(f"{path}:{line}: {reason}")
        self.path = path
        self.line = line


class DuplicateKey(AxiouError, ValueError):
    def __init__(self, key: str, where: str = ""):
        suffix = f" ({where})" if where else ""
        super().__init__(f"duplicate query_id {key!r}{suffix}")
        self.key = key
