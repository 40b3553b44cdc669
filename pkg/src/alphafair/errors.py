"""Exception hierarchy shared by all modules."""


class AlphaFairError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(AlphaFairError):
    pass


class NoPathError(AlphaFairError):
    pass


class DimensionMismatch(AlphaFairError):
    pass


class InvalidModel(AlphaFairError):
    pass


class EmptySamples(AlphaFairError):
    pass


class BadGranularity(AlphaFairError):
    pass


class EpsilonTooLarge(AlphaFairError):
    pass


class NonPositiveUtility(AlphaFairError):
    pass


class TooLarge(AlphaFairError):
    """Instance exceeds the brute-force enumeration guard."""


class ZeroBaseline(AlphaFairError):
    """ICOP/ICUP are undefined when the alpha=0 baseline is zero."""


class ZeroMean(AlphaFairError):
    """Coefficient of variation is undefined for a zero mean."""
