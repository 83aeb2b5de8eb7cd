"""Exception hierarchy shared by all modules."""


class DefectiveFlowError(Exception):
    """Base class for every error raised by this package."""


class ShapeError(DefectiveFlowError, ValueError):
    """Operand dimensions do not match."""


class SingularDiagonalError(DefectiveFlowError, ArithmeticError):
    """A diagonal entry needed for a diagonal inverse is (numerically) zero."""

    def __init__(self, row, value):
        self.row = row
        self.value = value
        super().__init__(f"diagonal entry of row {row} is singular ({value!r})")


class SingularL33Error(DefectiveFlowError, ArithmeticError):
    """The small multiplier block cannot be factorized.

    Usually the flow-rate rows of the coupling matrix are linearly dependent,
    e.g. the same section was declared twice.
    """


class ConfigError(DefectiveFlowError, ValueError):
    pass


class AssemblyError(DefectiveFlowError):
    pass


class DomainError(DefectiveFlowError, ValueError):
    pass


class BreakdownError(DefectiveFlowError, ArithmeticError):
    """Krylov iteration produced a non-finite residual."""


class InnerSolverError(DefectiveFlowError):
    """An inner solve failed inside a preconditioner application."""

    def __init__(self, step, cause):
        self.step = step
        super().__init__(f"inner solve failed in step {step!r}: {cause}")
