"""Exception hierarchy shared by every calibration module."""


class DPCalibError(Exception):
    """Base class for all package errors."""


class DomainError(DPCalibError, ValueError):
    """An argument lies outside the mathematical domain of a function."""


class InfeasibleTargetError(DomainError):
    """Elicited moments violate a hard support constraint on K_J."""

    def __init__(self, message, inequality=None):
        super().__init__(message)
        self.inequality = inequality


class ConvergenceError(DPCalibError, ArithmeticError):
    """An iterative numerical routine exhausted its budget."""


class CalibrationError(DPCalibError, RuntimeError):
    """A numerical building block failed while calibrating."""
