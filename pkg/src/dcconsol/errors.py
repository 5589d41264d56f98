"""Exception hierarchy shared by every module."""


class DcError(Exception):
    """Base class for all simulator errors."""


class DomainError(DcError, ValueError):
    """An argument is outside the domain of the operation."""


class NotFoundError(DcError, KeyError):
    """An id does not name a host, VM or container in the state."""

    def __str__(self):
        return str(self.args[0]) if self.args else "not found"


class PreconditionError(DcError):
    """The state does not satisfy an operation's precondition."""


class RejectedMoveError(DcError):
    """Applying a move would break the threshold policy."""


class InfeasibleError(DcError):
    """A bin-packing item cannot fit any bin."""


class InstanceTooLargeError(DcError):
    """The exact oracle was given more items than it accepts."""


class IntegrityError(DcError):
    """Report inputs do not agree with each other."""


class ScenarioError(DcError):
    """Malformed scenario; ``path`` names the offending location."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class InfeasibleScenarioError(ScenarioError):
    """Explicit assignments in a scenario break the capacity threshold."""
