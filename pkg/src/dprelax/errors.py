"""Exception types shared across the package."""


class DPRelaxError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(DPRelaxError, ValueError):
    """An argument is outside its documented domain."""


class BudgetDecreaseError(ParameterError):
    """A relaxation step asked for a smaller privacy parameter than the current one."""


class IllConditionedError(ParameterError):
    """The privacy parameter is so small that debiasing is numerically meaningless."""


class EnumerationLimitError(DPRelaxError):
    """An exhaustive audit would enumerate more sequences than the configured cap."""


class ConfigError(DPRelaxError, ValueError):
    """An experiment configuration failed validation."""
