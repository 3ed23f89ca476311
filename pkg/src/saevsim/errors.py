"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A scenario, network or policy configuration is malformed."""


class InputError(ValueError):
    """A caller passed an argument outside the operation's domain."""


class DomainError(ValueError):
    """A numeric argument lies outside the mathematical domain of a formula."""


class LogicError(RuntimeError):
    """An operation was invoked in a state where it is not allowed."""


class ScenarioLoadError(ConfigError):
    """Raised with every validation problem found while loading a scenario."""

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
