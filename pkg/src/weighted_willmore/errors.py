"""Exception types raised by the toolkit.

Every error maps onto the CLI exit-code contract: anything derived from
:class:`ConfigurationError` or :class:`HypothesisViolation` exits with 2.
"""


class WillmoreError(Exception):
    """Base class for all toolkit errors."""


class DomainError(WillmoreError, ValueError):
    """A point or parameter lies outside the chart / formula domain."""


class ConfigurationError(WillmoreError, ValueError):
    """An ambient, scene or option combination is invalid."""


class UnsupportedError(WillmoreError, NotImplementedError):
    """The requested operation is not available for this model or shape."""


class DegenerateImmersion(WillmoreError, ArithmeticError):
    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class HypothesisViolation(WillmoreError):
    """A theorem or lemma hypothesis fails on the supplied data.

    ``check`` names the failing check so that reports can echo it.
    """

    def __init__(self, check, message):
        super().__init__(f"{check}: {message}")
        self.check = check


class NumericError(WillmoreError, ArithmeticError):
    def __init__(self, message, last_good=None):
        super().__init__(message)
        self.last_good = last_good
