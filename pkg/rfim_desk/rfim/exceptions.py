class RfimError(Exception):
    """Base class; ``exit_code`` is what the management commands return."""
    exit_code = 1


class InputError(RfimError, ValueError):
    exit_code = 4


class InfeasiblePinning(InputError):
    pass


class FerromagnetismRequired(InputError):
    pass


class DisconnectedGraph(InputError):
    def __init__(self, message, vertex=None):
        super().__init__(message)
        self.vertex = vertex


class CapacityError(RfimError):
    exit_code = 3


class ValidationFailure(RfimError):
    exit_code = 2


def check_capacity(free_count, limit, what):
    if free_count > limit:
        raise CapacityError(f"{what} needs at most {limit} free vertices, got {free_count}.")
