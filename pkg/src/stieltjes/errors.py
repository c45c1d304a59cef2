"""Exception types shared across the package."""


class DomainError(ValueError):
    """A point or interval lies outside the domain of a function."""


class HypothesisError(ValueError):
    """A theorem's hypothesis does not hold for the given inputs.

    The message names the violated hypothesis, e.g. ``"phi changes sign;
    eq7 requires constant sign"``.
    """


class BudgetExhaustedError(RuntimeError):
    """A refinement ran out of rounds or cells before reaching its target."""


class NotCertifiedError(RuntimeError):
    """An integral could not be certified to the requested width.

    ``enclosure`` is still a valid bracket of the integral, only wider
    than requested; ``report`` is the final certification report.
    """

    def __init__(self, message, enclosure, report):
        super().__init__(message)
        self.enclosure = enclosure
        self.report = report
