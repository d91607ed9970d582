"""Exception hierarchy.

Every error raised on purpose by the package derives from
:class:`LindstedtError`, so callers (and the CLI) can separate user
errors from bugs.
"""


class LindstedtError(Exception):
    """Base class for all package errors."""


class ConfigurationError(LindstedtError, ValueError):
    """Invalid user input: bad parameters, schema failures, inconsistent configs."""


# rotation numbers
class RationalRotation(ConfigurationError):
    """The continued fraction terminates within the requested depth."""


class InsufficientPrecision(ConfigurationError):
    """The input cannot certify the requested number of CF terms."""


class DepthExceeded(ConfigurationError):
    pass


class PrecisionExhausted(LindstedtError):
    """A momentum falls outside the range certified by the rotation number."""


# models
class SchemaError(ConfigurationError):
    pass


class RealityViolation(ConfigurationError):
    """Table entries do not satisfy sigma_{-nu} = conj(sigma_nu)."""


class DecayViolation(ConfigurationError):
    pass


class ZeroTwist(ConfigurationError):
    """B_1 = 0, i.e. the twist condition fails."""


# series
class ZeroCompatibilityFailure(LindstedtError):
    """The nu = 0 right-hand side did not cancel; indicates a coding or precision fault."""


class OrderUnavailable(ConfigurationError):
    pass


class InvalidOrder(ConfigurationError):
    pass


class GridTooCoarse(ConfigurationError):
    pass


class FitImpossible(ConfigurationError):
    pass


class AssemblyError(LindstedtError):
    """Assembled curve values carry a non-negligible imaginary part."""


# trees / radius
class OrderCapExceeded(ConfigurationError):
    pass


class WindowTooShort(ConfigurationError):
    pass
