"""Exception hierarchy for mesh improvement."""

__all__ = [
    "MeshError",
    "NonManifoldFacet",
    "InvalidMesh",
    "DisconnectedSeed",
    "OpenShell",
    "VolumeMismatch",
    "OrientationViolation",
    "ShellMismatch",
    "EmptySet",
    "DegenerateTet",
    "NotAdjacent",
    "ConstrainedFacet",
    "BoundaryVertex",
    "TooManyPoints",
    "NoCandidate",
    "ParseError",
    "UnsupportedElement",
]


class MeshError(Exception):
    """Base class for all errors raised by tetimprove."""


class NonManifoldFacet(MeshError):
    def __init__(self, facet):
        self.facet = tuple(int(v) for v in facet)
        super().__init__(f"facet {self.facet} is shared by more than two tetrahedra")


class InvalidMesh(MeshError):
    pass


class DisconnectedSeed(MeshError):
    pass


class OpenShell(MeshError):
    pass


class VolumeMismatch(MeshError):
    pass


class OrientationViolation(MeshError):
    pass


class ShellMismatch(MeshError):
    pass


class EmptySet(MeshError, ValueError):
    pass


class DegenerateTet(MeshError, ValueError):
    pass


class NotAdjacent(MeshError):
    pass


class ConstrainedFacet(MeshError):
    pass


class BoundaryVertex(MeshError):
    pass


class TooManyPoints(MeshError):
    pass


class NoCandidate(MeshError):
    pass


class ParseError(MeshError):
    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}: "
        elif where:
            where += " "
        super().__init__(where + message)


class UnsupportedElement(ParseError):
    pass
