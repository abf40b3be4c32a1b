"""Exception hierarchy shared across the package."""


class AffineCrackError(Exception):
    """Base class for every error raised by this package."""


class KeyValidationError(AffineCrackError, ValueError):
    """An affine key whose multiplier is not coprime to 26, or out of range."""


class NoInverseError(AffineCrackError, ValueError):
    pass


class KeyIndexRangeError(AffineCrackError, IndexError):
    pass


class EmptyCorpusError(AffineCrackError, ValueError):
    pass


class InsufficientCorpusError(AffineCrackError, ValueError):
    pass


class MalformedFileError(AffineCrackError):
    """A container file that is truncated or cannot be parsed."""


class FormatVersionError(AffineCrackError):
    pass


class DigestMismatchError(AffineCrackError):
    pass


class ShapeError(AffineCrackError, ValueError):
    pass


class LabelError(AffineCrackError, ValueError):
    pass


class VocabError(AffineCrackError, ValueError):
    pass


class NumericError(AffineCrackError, FloatingPointError):
    pass


class EmptyDataError(AffineCrackError, ValueError):
    pass


class ConfigError(AffineCrackError, ValueError):
    pass


class InputError(AffineCrackError, ValueError):
    pass
