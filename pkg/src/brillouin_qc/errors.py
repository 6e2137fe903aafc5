"""Exception types shared across the package."""


class ParameterError(ValueError):
    """A physical parameter is non-finite or violates its constraints.

    ``param`` names the offending field so callers (the CLI in particular)
    can report it.
    """

    def __init__(self, param, message):
        super().__init__(f"{param}: {message}")
        self.param = param


class ConfigError(ParameterError):
    pass


class NonConvergence(RuntimeError):
    def __init__(self, message, residual):
        super().__init__(f"{message} (final residual {residual:.3e})")
        self.residual = residual


class UnstableSystem(RuntimeError):
    def __init__(self, margin):
        super().__init__(f"drift matrix is not stable (spectral abscissa {margin:.3e})")
        self.margin = margin


class SingularSystem(RuntimeError):
    pass


class NonPhysicalInput(ValueError):
    pass


class NoSignChange(ValueError):
    pass
