class ChargeLabError(Exception):
    """Base class for every error raised by this package."""


class ParameterError(ChargeLabError, ValueError):
    """A cell parameter or discretization value is invalid.

    Parameters:
        - name - name of the offending parameter
        - message - what is wrong with it
    """

    def __init__(self, name: str, message: str) -> None:
        self.name = name
        super().__init__(f"{name}: {message}")


class ConfigError(ChargeLabError, ValueError):
    """Malformed or inconsistent configuration (unknown keys, bad ranges, missing files)."""


class SimulationError(ChargeLabError, RuntimeError):
    """The simulator was asked to do something it cannot (singular voltage, bad step size)."""


class EnvironmentStateError(ChargeLabError, RuntimeError):
    """An environment was used out of order, e.g. stepped after it terminated."""


class DivergenceError(ChargeLabError, ArithmeticError):
    """A loss or gradient became non-finite during training."""


class ShapeError(ChargeLabError, ValueError):
    """Network, batch or checkpoint dimensions do not match."""
