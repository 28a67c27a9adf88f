class ConfigError(ValueError):
    """Invalid or unparsable system configuration."""


class InfeasibleDesignError(ValueError):
    """A design request violates the power constraint or the MSE floor.

    ``floor`` carries the smallest achievable MSE requirement when known and
    ``user`` the index of the user whose power budget is violated.
    """

    def __init__(self, message, floor=None, user=None):
        super().__init__(message)
        self.floor = floor
        self.user = user


class DegenerateDesignError(ValueError):
    """The design makes a receive covariance singular."""


class ZeroForcingError(ValueError):
    """The artificial-noise basis leaks into the legitimate channel."""
