"""Core 3D math: vectors, unit quaternions, camera poses, geodetic conversion.

Conventions used throughout the package:

* right-handed local frame, x east, y north, z up
* camera forward is the +x axis of the camera frame
* quaternions are scalar-first (w, x, y, z) and kept unit-norm
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DegenerateDirection, GimbalCase

EARTH_RADIUS_M = 6378137.0

# renormalize quaternions when the norm drifts further than this from 1
_NORM_TOL = 1e-9
# below this arc angle slerp falls back to normalized lerp
_SLERP_EPS = 1e-7


@dataclass(frozen=True)
class Vec3:
    x: float
    y: float
    z: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.z)):
            raise ValueError(f"non-finite vector component: ({self.x}, {self.y}, {self.z})")

    def __add__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x + other.x, self.y + other.y, self.z + other.z)

    def __sub__(self, other: "Vec3") -> "Vec3":
        return Vec3(self.x - other.x, self.y - other.y, self.z - other.z)

    def __mul__(self, k: float) -> "Vec3":
        return Vec3(self.x * k, self.y * k, self.z * k)

    __rmul__ = __mul__

    def dot(self, other: "Vec3") -> float:
        return self.x * other.x + self.y * other.y + self.z * other.z

    def cross(self, other: "Vec3") -> "Vec3":
        return Vec3(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )

    def norm(self) -> float:
        return math.sqrt(self.dot(self))

    def normalized(self) -> "Vec3":
        n = self.norm()
        if n == 0.0:
            raise ValueError("cannot normalize the zero vector")
        return Vec3(self.x / n, self.y / n, self.z / n)

    def to_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z], dtype=np.float64)

    @staticmethod
    def from_array(a) -> "Vec3":
        return Vec3(float(a[0]), float(a[1]), float(a[2]))


UNIT_X = Vec3(1.0, 0.0, 0.0)
UNIT_Y = Vec3(0.0, 1.0, 0.0)
UNIT_Z = Vec3(0.0, 0.0, 1.0)


@dataclass(frozen=True)
class Quaternion:
    """Unit quaternion, scalar first.  Renormalized on construction."""

    w: float
    x: float
    y: float
    z: float

    def __post_init__(self):
        n2 = self.w * self.w + self.x * self.x + self.y * self.y + self.z * self.z
        if not math.isfinite(n2) or n2 == 0.0:
            raise ValueError(f"degenerate quaternion ({self.w}, {self.x}, {self.y}, {self.z})")
        if abs(n2 - 1.0) > _NORM_TOL:
            n = math.sqrt(n2)
            object.__setattr__(self, "w", self.w / n)
            object.__setattr__(self, "x", self.x / n)
            object.__setattr__(self, "y", self.y / n)
            object.__setattr__(self, "z", self.z / n)

    @staticmethod
    def identity() -> "Quaternion":
        return Quaternion(1.0, 0.0, 0.0, 0.0)

    @staticmethod
    def from_axis_angle(axis: Vec3, angle_rad: float) -> "Quaternion":
        u = axis.normalized()
        h = 0.5 * angle_rad
        s = math.sin(h)
        return Quaternion(math.cos(h), u.x * s, u.y * s, u.z * s)

    def __mul__(self, other: "Quaternion") -> "Quaternion":
        # Hamilton product; self is applied after other when rotating vectors
        w1, x1, y1, z1 = self.w, self.x, self.y, self.z
        w2, x2, y2, z2 = other.w, other.x, other.y, other.z
        return Quaternion(
            w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2,
            w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2,
            w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2,
            w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2,
        )

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    inverse = conjugate

    def dot(self, other: "Quaternion") -> float:
        return self.w * other.w + self.x * other.x + self.y * other.y + self.z * other.z

    def negate(self) -> "Quaternion":
        return Quaternion(-self.w, -self.x, -self.y, -self.z)

    def rotate(self, v: Vec3) -> Vec3:
        # q v q* expanded to avoid building intermediate quaternions
        qv = Vec3(self.x, self.y, self.z)
        uv = qv.cross(v)
        uuv = qv.cross(uv)
        return v + 2.0 * self.w * uv + 2.0 * uuv

    def angle_to(self, other: "Quaternion") -> float:
        """Angle in radians of the rotation taking self to other."""
        d = min(1.0, abs(self.dot(other)))
        return 2.0 * math.acos(d)

    def to_matrix(self) -> np.ndarray:
        w, x, y, z = self.w, self.x, self.y, self.z
        return np.array(
            [
                [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
                [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
                [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
            ],
            dtype=np.float64,
        )

    @staticmethod
    def from_matrix(m: np.ndarray) -> "Quaternion":
        # Shepperd's method: pick the largest diagonal combination
        t = m[0, 0] + m[1, 1] + m[2, 2]
        if t > 0:
            r = math.sqrt(1.0 + t)
            s = 0.5 / r
            return Quaternion(0.5 * r, (m[2, 1] - m[1, 2]) * s, (m[0, 2] - m[2, 0]) * s, (m[1, 0] - m[0, 1]) * s)
        i = int(np.argmax([m[0, 0], m[1, 1], m[2, 2]]))
        j, k = (i + 1) % 3, (i + 2) % 3
        r = math.sqrt(1.0 + m[i, i] - m[j, j] - m[k, k])
        s = 0.5 / r
        q = [0.0, 0.0, 0.0, 0.0]
        q[0] = (m[k, j] - m[j, k]) * s
        q[1 + i] = 0.5 * r
        q[1 + j] = (m[j, i] + m[i, j]) * s
        q[1 + k] = (m[k, i] + m[i, k]) * s
        return Quaternion(q[0], q[1], q[2], q[3])

    @staticmethod
    def between(a: Vec3, b: Vec3) -> "Quaternion":
        """Minimal rotation taking direction a to direction b."""
        u = a.normalized()
        v = b.normalized()
        d = u.dot(v)
        if d > 1.0 - 1e-15:
            return Quaternion.identity()
        if d < -1.0 + 1e-12:
            # opposite directions: rotate half a turn about any perpendicular axis
            axis = u.cross(UNIT_X)
            if axis.norm() < 1e-9:
                axis = u.cross(UNIT_Y)
            return Quaternion.from_axis_angle(axis, math.pi)
        axis = u.cross(v)
        w = 1.0 + d
        return Quaternion(w, axis.x, axis.y, axis.z)


def slerp(q1: Quaternion, q2: Quaternion, p: float) -> Quaternion:
    """Spherical interpolation from q1 (p=0) to q2 (p=1) along the shorter arc."""
    d = q1.dot(q2)
    if d < 0.0:
        q2 = q2.negate()
        d = -d
    d = min(1.0, d)
    theta = math.acos(d)
    if theta < _SLERP_EPS:
        w = q1.w + (q2.w - q1.w) * p
        x = q1.x + (q2.x - q1.x) * p
        y = q1.y + (q2.y - q1.y) * p
        z = q1.z + (q2.z - q1.z) * p
        return Quaternion(w, x, y, z)
    s = math.sin(theta)
    a = math.sin((1.0 - p) * theta) / s
    b = math.sin(p * theta) / s
    return Quaternion(
        a * q1.w + b * q2.w,
        a * q1.x + b * q2.x,
        a * q1.y + b * q2.y,
        a * q1.z + b * q2.z,
    )


@dataclass(frozen=True)
class CameraPose:
    position: Vec3
    orientation: Quaternion

    def forward(self) -> Vec3:
        return self.orientation.rotate(UNIT_X)


@dataclass(frozen=True)
class GeodeticPoint:
    lat_deg: float
    lon_deg: float
    height_m: float = 0.0

    def __post_init__(self):
        if not -90.0 <= self.lat_deg <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat_deg}")
        if not -180.0 <= self.lon_deg <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon_deg}")


def enu_from_geodetic(origin: GeodeticPoint, p: GeodeticPoint) -> Vec3:
    """Local tangent-plane coordinates of p relative to origin.

    Spherical earth of radius 6378137 m; adequate for scenes a few km across.
    """
    lat0 = math.radians(origin.lat_deg)
    dlat = math.radians(p.lat_deg - origin.lat_deg)
    dlon = math.radians(p.lon_deg - origin.lon_deg)
    x = EARTH_RADIUS_M * dlon * math.cos(lat0)
    y = EARTH_RADIUS_M * dlat
    z = p.height_m - origin.height_m
    return Vec3(x, y, z)


def geodetic_from_enu(origin: GeodeticPoint, v: Vec3) -> GeodeticPoint:
    lat0 = math.radians(origin.lat_deg)
    dlat = v.y / EARTH_RADIUS_M
    dlon = v.x / (EARTH_RADIUS_M * math.cos(lat0))
    return GeodeticPoint(
        origin.lat_deg + math.degrees(dlat),
        origin.lon_deg + math.degrees(dlon),
        origin.height_m + v.z,
    )


def look_at_quaternion(eye: Vec3, target: Vec3, up_hint: Optional[Vec3] = None) -> Quaternion:
    """Roll-free orientation with camera +x toward target.

    The camera +z axis is kept in the plane spanned by world up and the view
    direction.  Within half a degree of straight up or down that plane is
    unusable; an up_hint must break the tie or GimbalCase is raised.
    """
    d = target - eye
    n = d.norm()
    if n < 1e-12:
        raise DegenerateDirection("look-at target coincides with eye")
    f = Vec3(d.x / n, d.y / n, d.z / n)
    up = UNIT_Z
    # sin of the angle between forward and vertical
    horiz = math.hypot(f.x, f.y)
    if horiz < math.sin(math.radians(0.5)):
        if up_hint is None:
            raise GimbalCase("view direction within 0.5 degrees of vertical and no up hint")
        up = up_hint.normalized()
    left = up.cross(f)
    ln = left.norm()
    if ln < 1e-12:
        raise GimbalCase("up hint parallel to view direction")
    left = Vec3(left.x / ln, left.y / ln, left.z / ln)
    cam_up = f.cross(left)
    m = np.array(
        [
            [f.x, left.x, cam_up.x],
            [f.y, left.y, cam_up.y],
            [f.z, left.z, cam_up.z],
        ],
        dtype=np.float64,
    )
    return Quaternion.from_matrix(m)


def quat_array(q: Quaternion) -> np.ndarray:
    return np.array([q.w, q.x, q.y, q.z], dtype=np.float64)


def quat_mult_arrays(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Hamilton product over (..., 4) scalar-first arrays."""
    w1, x1, y1, z1 = a[..., 0], a[..., 1], a[..., 2], a[..., 3]
    w2, x2, y2, z2 = b[..., 0], b[..., 1], b[..., 2], b[..., 3]
    out = np.empty(np.broadcast(a, b).shape[:-1] + (4,), dtype=np.float64)
    out[..., 0] = w1 * w2 - x1 * x2 - y1 * y2 - z1 * z2
    out[..., 1] = w1 * x2 + x1 * w2 + y1 * z2 - z1 * y2
    out[..., 2] = w1 * y2 - x1 * z2 + y1 * w2 + z1 * x2
    out[..., 3] = w1 * z2 + x1 * y2 - y1 * x2 + z1 * w2
    return out
