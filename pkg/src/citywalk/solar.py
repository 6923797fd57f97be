"""Sun position from date, time and geodetic location.

Implements the NOAA solar position equations (Julian century polynomials for
the solar longitude, declination and the equation of time, then hour angle to
azimuth and elevation).  Angles are geometric: no atmospheric refraction.
Accuracy is a few hundredths of a degree over the present era, far inside the
one-degree budget the overlays need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from datetime import datetime, timezone

from .geom import GeodeticPoint, Vec3


@dataclass(frozen=True)
class SunState:
    azimuth_deg: float  # from north, clockwise
    elevation_deg: float
    above_horizon: bool

    def direction(self) -> Vec3:
        """Unit vector toward the sun in the east/north/up frame."""
        az = math.radians(self.azimuth_deg)
        el = math.radians(self.elevation_deg)
        return Vec3(math.sin(az) * math.cos(el), math.cos(az) * math.cos(el), math.sin(el))

    @staticmethod
    def from_azimuth_elevation(azimuth_deg: float, elevation_deg: float) -> "SunState":
        return SunState(
            azimuth_deg=azimuth_deg % 360.0,
            elevation_deg=elevation_deg,
            above_horizon=elevation_deg > 0.0,
        )


def _julian_day(t: datetime) -> float:
    y = t.year
    m = t.month
    d = (
        t.day
        + t.hour / 24.0
        + t.minute / 1440.0
        + (t.second + t.microsecond / 1e6) / 86400.0
    )
    if m <= 2:
        y -= 1
        m += 12
    a = y // 100
    b = 2 - a + a // 4
    return math.floor(365.25 * (y + 4716)) + math.floor(30.6001 * (m + 1)) + d + b - 1524.5


def sun_position(timestamp: datetime, location: GeodeticPoint) -> SunState:
    """Sun azimuth/elevation at a UTC timestamp; naive datetimes are taken as UTC."""
    if timestamp.tzinfo is not None:
        timestamp = timestamp.astimezone(timezone.utc)
    jd = _julian_day(timestamp)
    t = (jd - 2451545.0) / 36525.0

    l0 = (280.46646 + t * (36000.76983 + 0.0003032 * t)) % 360.0
    m = 357.52911 + t * (35999.05029 - 0.0001537 * t)
    ecc = 0.016708634 - t * (0.000042037 + 0.0000001267 * t)
    mr = math.radians(m)
    c = (
        math.sin(mr) * (1.914602 - t * (0.004817 + 0.000014 * t))
        + math.sin(2 * mr) * (0.019993 - 0.000101 * t)
        + math.sin(3 * mr) * 0.000289
    )
    true_long = l0 + c
    omega = math.radians(125.04 - 1934.136 * t)
    app_long = true_long - 0.00569 - 0.00478 * math.sin(omega)

    e0 = 23.0 + (26.0 + (21.448 - t * (46.815 + t * (0.00059 - t * 0.001813))) / 60.0) / 60.0
    eps = math.radians(e0 + 0.00256 * math.cos(omega))

    decl = math.asin(math.sin(eps) * math.sin(math.radians(app_long)))

    y = math.tan(eps / 2.0) ** 2
    l0r = math.radians(l0)
    eqtime = 4.0 * math.degrees(
        y * math.sin(2 * l0r)
        - 2 * ecc * math.sin(mr)
        + 4 * ecc * y * math.sin(mr) * math.cos(2 * l0r)
        - 0.5 * y * y * math.sin(4 * l0r)
        - 1.25 * ecc * ecc * math.sin(2 * mr)
    )

    minutes = (
        timestamp.hour * 60.0
        + timestamp.minute
        + (timestamp.second + timestamp.microsecond / 1e6) / 60.0
    )
    tst = (minutes + eqtime + 4.0 * location.lon_deg) % 1440.0
    ha = tst / 4.0 - 180.0
    if ha < -180.0:
        ha += 360.0

    lat = math.radians(location.lat_deg)
    har = math.radians(ha)
    cos_zen = math.sin(lat) * math.sin(decl) + math.cos(lat) * math.cos(decl) * math.cos(har)
    cos_zen = max(-1.0, min(1.0, cos_zen))
    zen = math.acos(cos_zen)
    elevation = 90.0 - math.degrees(zen)

    sin_zen = math.sin(zen)
    if abs(sin_zen) < 1e-12:
        azimuth = 0.0
    else:
        cos_az = (math.sin(lat) * cos_zen - math.sin(decl)) / (math.cos(lat) * sin_zen)
        cos_az = max(-1.0, min(1.0, cos_az))
        az = math.degrees(math.acos(cos_az))
        if ha > 0.0:
            azimuth = (az + 180.0) % 360.0
        else:
            azimuth = (540.0 - az) % 360.0

    return SunState(
        azimuth_deg=azimuth,
        elevation_deg=elevation,
        above_horizon=elevation > 0.0,
    )
