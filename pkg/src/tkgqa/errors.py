"""Exception types shared across the package."""


class TkgqaError(Exception):
    """Base class for all package errors."""


class ParseError(TkgqaError):
    """A data file is malformed; message names the offending line."""


class VocabularyError(TkgqaError):
    """A name or id does not resolve against the KG vocabularies."""


class ShapeError(TkgqaError):
    """Array arguments have incompatible shapes."""


class ConfigError(TkgqaError):
    """A configuration value is missing, unknown or inconsistent."""


class InputError(TkgqaError):
    """Caller passed an invalid input value (distinct from backend failures)."""


class EncoderBackendError(TkgqaError):
    """The selected text-encoder backend cannot be constructed or used."""


class DivergenceError(TkgqaError):
    """Training produced a non-finite loss; aborted with diagnostics."""
