"""Exception types raised across the toolkit."""

from __future__ import annotations


class ImbalForestError(ValueError):
    """Base class for every error the toolkit raises on bad input."""


class SchemaError(ImbalForestError):
    pass


class ParseError(ImbalForestError):
    pass


class DatasetFormatError(ImbalForestError):
    pass


class ModelFormatError(ImbalForestError):
    pass


class ConfigError(ImbalForestError):
    pass
