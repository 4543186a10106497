"""Exception hierarchy; ``exit_code`` is what the command line returns."""


class AttlabError(Exception):
    exit_code = 1


class UsageError(AttlabError, ValueError):
    exit_code = 2


class ShapeError(UsageError):
    pass


class ResourceError(AttlabError):
    """A truncation, sector or cutoff budget was exceeded."""

    exit_code = 3


class CutoffError(ResourceError):
    pass


class IntegratorError(ResourceError):
    pass


class InvariantViolation(AttlabError):
    exit_code = 4


class InvalidStateError(InvariantViolation):
    pass
