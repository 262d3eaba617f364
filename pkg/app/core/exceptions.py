from typing import Any


class PinnError(Exception):
    """Base error. `exit_code` is what the command line returns for it."""

    exit_code: int = 1

    def __init__(self, detail: str, exit_code: int | None = None):
        super().__init__(detail)
        self.detail = detail
        if exit_code is not None:
            self.exit_code = exit_code


class ConfigError(PinnError):
    exit_code = 1

    def __init__(self, violations: list[str]):
        self.violations = list(violations)
        super().__init__("; ".join(self.violations) or "invalid configuration")


class HypothesisError(PinnError):
    """A theory calculator was called outside the hypotheses of its closed form."""

    exit_code = 1


class VerificationError(PinnError):
    exit_code = 2


class BlowUpError(PinnError):
    exit_code = 3

    def __init__(self, detail: str, record: Any = None):
        super().__init__(detail)
        self.record = record


class NonFiniteError(BlowUpError):
    pass
