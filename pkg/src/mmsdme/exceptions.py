"""Exception hierarchy shared by every mechanism and the accountant."""


class MechanismError(Exception):
    """Base class for all errors raised by this package."""


class ParameterError(MechanismError, ValueError):
    """A mechanism or accountant parameter is outside its valid range."""


class InputDomainError(MechanismError, ValueError):
    """A client input violates the domain the mechanism was configured for."""


class MalformedMessageError(MechanismError, ValueError):
    """A message or wire payload cannot be decoded consistently."""


class DegenerateBudgetError(ParameterError):
    """The privacy budget is so small that the flip probability reaches 1/2."""


class AmplificationRangeError(MechanismError, ValueError):
    """No Renyi order is admissible for an amplification bound."""


class CertificationError(MechanismError):
    """A configured mechanism does not meet its privacy target.

    The achieved value is kept on ``achieved`` so callers can report it.
    """

    def __init__(self, message, achieved=None, report=None):
        super().__init__(message)
        self.achieved = achieved
        self.report = report
