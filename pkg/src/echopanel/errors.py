"""Exception hierarchy shared by all modules."""


class EchoPanelError(Exception):
    """Base class; the CLI maps it to exit status 1."""


class ParameterError(EchoPanelError, ValueError):
    pass


class DegenerateReferenceError(EchoPanelError):
    """A normalisation reference carries no energy."""


class SymmetryUnavailableError(EchoPanelError):
    """The grid is not invariant under the requested square symmetry."""


class DependencyError(EchoPanelError):
    """A reference panel required for processing is missing."""


class FormatError(EchoPanelError):
    """A file on disk does not match the expected layout."""
