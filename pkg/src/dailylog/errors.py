"""Exception hierarchy shared across the pipeline."""

from __future__ import annotations


class DailyLogError(Exception):
    """Base class for every error raised by this package."""


class InvalidInput(DailyLogError, ValueError):
    """An argument violates a documented precondition."""


# ingest
class DecodeError(DailyLogError):
    pass


class SchemaError(DailyLogError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class EmptyStream(DailyLogError):
    pass


# annotate
class NegativeInput(InvalidInput):
    pass


class PositiveDbfs(InvalidInput):
    pass


class NonpositivePressure(InvalidInput):
    pass


class EmptyClip(InvalidInput):
    pass


# geoloc
class ProviderError(DailyLogError):
    pass


class NoCoverage(DailyLogError):
    pass


# features
class EmptySeries(InvalidInput):
    pass


class TooShort(InvalidInput):
    pass


class NoImuData(DailyLogError):
    pass


class ClipTooShort(InvalidInput):
    pass


# prompts / inference
class MissingImu(DailyLogError):
    pass


class EmptyEntries(DailyLogError):
    pass


class NotTimeOrdered(DailyLogError):
    def __init__(self, index: int):
        self.index = index
        super().__init__(f"entries not time-ordered at index {index}")


class TemplateError(DailyLogError):
    pass


class BackendError(DailyLogError):
    """Any failure talking to a text-generation backend."""


class Timeout(BackendError):
    pass


class HttpStatus(BackendError):
    def __init__(self, code: int, body: str = ""):
        self.code = code
        super().__init__(f"HTTP {code}: {body[:200]}")


class BadResponseShape(BackendError):
    pass


class FeatureParseError(DailyLogError):
    pass


# logbook
class OutOfOrder(DailyLogError):
    pass


class EmptyWindow(DailyLogError):
    pass


# synth
class ConfigError(InvalidInput):
    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class MissingBaseline(ConfigError):
    pass


# eval
class LengthMismatch(InvalidInput):
    pass


class UnknownLabel(InvalidInput):
    pass


class EmptyMatrix(InvalidInput):
    pass
