"""Exception hierarchy for lorfv."""


class LorfvError(Exception):
    """Base class for all errors raised by lorfv."""


class EmptyGrid(LorfvError):
    pass


class EmptyRange(LorfvError):
    pass


class DegenerateFace(LorfvError):
    pass


class BadDimensions(LorfvError):
    pass


class NonMonotoneGrid(LorfvError):
    pass


class ShearTooLarge(LorfvError):
    pass


class MeshStructureError(LorfvError):
    """The mesh violates the structural triangulation axioms."""


class MeshParseError(LorfvError):
    pass


class OutOfRange(LorfvError):
    """No bracket for a face-average inversion inside the declared range."""


class InversionOutOfRange(OutOfRange):
    """Raised by the scheme when an update cannot be inverted.

    Usually means the CFL condition or the L-infinity envelope was violated.
    """


class DTooSmall(LorfvError):
    pass


class NeighborMissing(LorfvError):
    pass


class MissingNeighbor(NeighborMissing):
    """An element pair needed by a diagnostic has no predecessor."""


class UnsupportedPhi(LorfvError):
    pass


class ConvexityError(LorfvError):
    """A bound needing a positive modulus of convexity was applied to a
    non-strictly convex entropy."""


class InconsistentFamily(LorfvError):
    pass


class ConfigError(LorfvError):
    pass


class CflViolation(LorfvError):
    pass
