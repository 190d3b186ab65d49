class ConfigError(ValueError):
    """Invalid design configuration. Carries the list of violations."""

    def __init__(self, violations):
        if isinstance(violations, str):
            violations = [violations]
        self.violations = list(violations)
        super().__init__("; ".join(self.violations))


class UsageError(RuntimeError):
    """An operation was called outside its precondition."""
