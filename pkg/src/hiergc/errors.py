"""Exception hierarchy shared by every hiergc module."""


class HGCError(Exception):
    """Base class for all library errors."""


class ConfigurationError(HGCError, ValueError):
    """Invalid parameters, placements, evaluation plans or mismatched fields."""


class UnsupportedConfigError(ConfigurationError):
    """Parameters outside the range a scheme supports (e.g. private-mode r1)."""


class InvalidPlacementError(ConfigurationError):
    pass


class ModeError(ConfigurationError):
    """Operation requested in the wrong mode (plain vs private)."""


class FieldZeroDivisionError(HGCError, ZeroDivisionError):
    pass


class InvalidInputError(HGCError, ValueError):
    """Malformed decoder input such as duplicate evaluation points."""


class ArityError(InvalidInputError):
    pass


class InsufficientEvaluationsError(HGCError):
    pass


class DecodingError(HGCError):
    """No polynomial of the required degree agrees with enough evaluations."""


class AdversaryBudgetExceededError(DecodingError):
    pass


class InvalidFaultPlanError(HGCError, ValueError):
    pass


class TooManyPatternsError(HGCError):
    def __init__(self, count, cap):
        super().__init__(f"{count} fault patterns exceed the cap of {cap}")
        self.count = count
        self.cap = cap
