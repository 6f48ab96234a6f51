"""Exception hierarchy shared by the simulator and analysis code."""


class TFQKDError(Exception):
    """Base class for all package errors."""


class SingularMatrix(TFQKDError):
    """A preparation matrix is too ill-conditioned to invert."""

    def __init__(self, message, condition=float("inf")):
        super().__init__(message)
        self.condition = condition


class DegenerateSet(SingularMatrix):
    """A set of four preparations does not span the Pauli space."""


class InvalidModel(TFQKDError):
    """Interferometer parameters give click probabilities outside [0, 1]."""


class NoCounts(TFQKDError):
    """Neither detector registered a click for a preparation pair."""


class FitDegenerate(TFQKDError):
    """A phase scan does not constrain the sinusoid fit."""


class ProtocolViolation(TFQKDError):
    """A party received a message out of causal order."""


class MissingLabel(TFQKDError):
    """Bob's label reveals do not cover a required column."""


class ConfigError(TFQKDError):
    """An experiment configuration failed validation."""
