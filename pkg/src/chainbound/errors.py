class ChainboundError(ValueError):
    """Base class for input errors raised by this package."""


class ZeroColumn(ChainboundError):
    pass


class NotNormalized(ChainboundError):
    pass


class NotOrthogonal(ChainboundError):
    pass


class NotSorted(ChainboundError):
    pass


class DimensionMismatch(ChainboundError):
    pass


class NotInBall(ChainboundError):
    pass


class PoolTooLarge(ChainboundError):
    pass


class TooLarge(ChainboundError):
    pass


class InvalidRange(ChainboundError):
    pass


class ZeroShape(ChainboundError):
    pass


class NoGradient(ChainboundError):
    pass


class ConfigError(ChainboundError):
    pass
