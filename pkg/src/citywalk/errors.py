"""Exception types shared across the package."""


class CityWalkError(Exception):
    """Base class for all package-specific errors."""


class DegenerateDirection(CityWalkError):
    """Look-at target coincides with the eye position."""


class GimbalCase(CityWalkError):
    """View direction too close to the vertical axis to fix roll without a hint."""


class MalformedXml(CityWalkError):
    """Input is not well-formed XML or lacks the expected document structure."""


class UnsupportedLod(CityWalkError):
    """A building carries neither an LOD1 solid nor a usable footprint and height."""

    def __init__(self, building_id: str, reason: str = ""):
        self.building_id = building_id
        msg = f"building {building_id!r} has no usable LOD1 geometry"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class InvalidPolygon(CityWalkError):
    """A footprint ring is self-intersecting or otherwise not a simple polygon."""

    def __init__(self, building_id: str, reason: str = ""):
        self.building_id = building_id
        msg = f"building {building_id!r} has an invalid footprint"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class OutOfBounds(CityWalkError):
    """Query point lies outside the terrain grid."""


class TriangulationFailure(CityWalkError):
    """Ear clipping could not triangulate a footprint polygon."""


class CameraInsideGeometry(CityWalkError):
    """Camera position lies inside a building volume or below the terrain."""


class DimensionMismatch(CityWalkError):
    """Two masks that must share a shape do not."""


class EmptyInput(CityWalkError):
    """An aggregate was requested over zero items."""


class DegenerateStreet(CityWalkError):
    """Street endpoints too close together to orient a trajectory."""


class GravityDegenerate(CityWalkError):
    """Trajectory direction is parallel to gravity; heading is unconstrained."""


class NonFiniteObjective(CityWalkError):
    """The optimizer saw a NaN or infinite objective value."""


class NoHeldOutFrames(CityWalkError):
    """Alignment evaluation was asked to score an empty held-out set."""


class UnknownBuilding(CityWalkError):
    """Building id not present in the scene."""


class UnknownScenario(CityWalkError):
    """Flood scenario id not present in the scene."""


class SunBelowHorizon(CityWalkError):
    """Shadow rendering requested for a sun position below the horizon."""


class SceneNotLoaded(CityWalkError):
    """Service operation requires a scene that has not been loaded."""


class SessionUnknown(CityWalkError):
    """Walk session id does not exist."""


class NoBuildingAtPixel(CityWalkError):
    """Click ray did not hit any building surface."""
