"""Exception types shared by every module.

The CLI maps these onto exit codes: precondition violations exit with 1,
budget overruns with 2.
"""


class PreconditionError(ValueError):
    """An input violates the documented contract of an operation."""


class BudgetExceeded(RuntimeError):
    """An exhaustive enumeration would exceed its configured cap."""

    def __init__(self, what, required, budget):
        self.what = what
        self.required = int(required)
        self.budget = int(budget)
        super().__init__(
            f"{what}: enumeration needs {self.required} items, budget is {self.budget}"
        )


class EmptyLevelError(RuntimeError):
    """A level of an inverse system is empty.

    At the finite horizon this means the requested bound admits no solution
    at that level, i.e. a falsifying instance for the bound.
    """

    def __init__(self, level, message=""):
        self.level = level
        super().__init__(message or f"level {level} of the inverse system is empty")


class StructureError(RuntimeError):
    """The rank-1 structure detection of the cyclic corrector failed.

    ``triple`` records the offending ``(a, c)`` index pair.
    """

    def __init__(self, message, triple=None):
        self.triple = triple
        super().__init__(message)
