"""Exception hierarchy. Each error carries the CLI exit code it maps to."""


class NLLTError(Exception):
    exit_code = 1

    def __init__(self, message: str, context: str = None):
        self.context = context
        if context:
            message = f"{context}: {message}"
        super().__init__(message)


# --- exit 2: parse / validation ---

class ValidationError(NLLTError):
    exit_code = 2


class ParseError(ValidationError):
    pass


class NonStochastic(ValidationError):
    pass


class ZeroMassState(ValidationError):
    pass


class NotConverged(ValidationError):
    pass


class LengthMismatch(ValidationError):
    pass


class NonFiniteValue(ValidationError):
    pass


class InconsistentExactValue(ValidationError):
    pass


class NotCentered(ValidationError):
    pass


class MixedRepresentation(ValidationError):
    pass


class KindMismatch(ValidationError):
    pass


class InvalidArgument(ValidationError):
    pass


# --- exit 3: precondition ---

class PreconditionError(NLLTError):
    exit_code = 3


class DegenerateVariance(PreconditionError):
    pass


class KindOther(PreconditionError):
    pass


class PositivityWindowUnavailable(PreconditionError):
    pass


class SolveFailed(PreconditionError):
    pass


# --- exit 4: budget / cap ---

class BudgetError(NLLTError):
    exit_code = 4


class CapExceeded(BudgetError):
    pass


class BudgetExceeded(BudgetError):
    pass
