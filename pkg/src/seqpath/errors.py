"""Exception hierarchy shared across the package.

The CLI maps ValidationError to exit code 1 and ComputationError to exit
code 2; everything else is a bug.
"""


class SeqpathError(Exception):
    """Base class for errors raised by seqpath."""


class ValidationError(SeqpathError):
    """Input data or parameters failed a structural or value check."""


class ComputationError(SeqpathError):
    """A numerical procedure could not produce a valid result."""
