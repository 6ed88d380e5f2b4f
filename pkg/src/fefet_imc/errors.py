"""Exception and warning types shared across the simulator."""


class SimulatorError(Exception):
    """Base class for all simulator failures."""


class ConfigError(SimulatorError):
    """Invalid configuration value or macro geometry."""


class EncodingError(SimulatorError):
    """Operand outside the representable range of the requested format."""


class MappingError(SimulatorError):
    """Weight tensor does not fit the macro geometry."""


class ConversionError(SimulatorError):
    """ADC cannot convert the given sample."""


class DegenerateDeviceWarning(UserWarning):
    """A sampled device fell below cutoff; its current was clamped to zero."""
