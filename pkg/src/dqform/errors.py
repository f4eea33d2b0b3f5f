"""Exception types for degenerate formation inputs.

These are raised instead of silently falling back: the formations have
genuine singularities and a loud failure is the testable behavior.
"""


class DegenerateFormationError(ValueError):
    """Robot positions do not define the formation (coincident, collinear,
    or first robot at the centroid)."""


class SingularGeometryError(ValueError):
    """Geometry parameters at a singular configuration (m ~ 0, antipodal
    pointing axes)."""
