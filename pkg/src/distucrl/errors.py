"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called with arguments outside its contract."""


class DivergedError(RuntimeError):
    """An iterative solver hit its iteration cap without converging."""

    def __init__(self, message, last_span=float("nan"), iterations=0):
        super().__init__(f"{message} (last span={last_span!r}, iterations={iterations})")
        self.last_span = last_span
        self.iterations = iterations


class InvariantViolation(AssertionError):
    """A recorded trace broke one of the algorithm's structural guarantees."""

    def __init__(self, violations):
        self.violations = list(violations)
        head = "; ".join(self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"{len(self.violations)} invariant violation(s): {head}{more}")
