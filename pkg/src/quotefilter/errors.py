"""Semantic exception hierarchy shared by all modules."""

from __future__ import annotations


class QuoteFilterError(Exception):
    """Base class for all package-specific errors."""


class NonFiniteIntegral(QuoteFilterError):
    """A normalizing integral overflowed or vanished."""


class EnvelopeViolation(QuoteFilterError):
    """An instantaneous intensity exceeded the thinning envelope.

    Raised during trade simulation when the unclipped intensity is above
    the configured cap, which signals a mis-set clip rather than a
    recoverable condition.
    """


class Underflow(QuoteFilterError):
    """A grid density decayed below representable range; renormalize more often."""


class ZeroMass(QuoteFilterError):
    """A density has zero (or non-finite) total mass and cannot be normalized."""


class PolicyStateMismatch(QuoteFilterError):
    """The posterior state handed to a quote policy has the wrong type."""


class NoConvergence(QuoteFilterError):
    """A root solve did not converge within the iteration budget."""


class DomainError(QuoteFilterError):
    """An argument is outside the mathematical domain of the formula."""


class ConfigError(QuoteFilterError):
    """A run configuration is malformed; message carries the field path."""


class IoError(QuoteFilterError):
    """An output file could not be written; message names the path."""
