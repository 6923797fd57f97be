import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.spatial.transform import Rotation

from citywalk.errors import DegenerateDirection, GimbalCase
from citywalk.geom import (
    EARTH_RADIUS_M,
    CameraPose,
    GeodeticPoint,
    Quaternion,
    Vec3,
    enu_from_geodetic,
    geodetic_from_enu,
    look_at_quaternion,
    slerp,
)

finite = st.floats(-1e3, 1e3, allow_nan=False)
unit_angle = st.floats(-math.pi, math.pi)


def vecs():
    return st.builds(Vec3, finite, finite, finite)


def quats():
    def make(x, y, z, w):
        n = math.sqrt(x * x + y * y + z * z + w * w)
        return Quaternion(w / n, x / n, y / n, z / n)

    c = st.floats(-1.0, 1.0).filter(lambda v: abs(v) > 1e-3)
    return st.builds(make, c, c, c, c)


def _scipy_rot(q: Quaternion) -> Rotation:
    return Rotation.from_quat([q.x, q.y, q.z, q.w])  # scalar-last


def test_vec3_arithmetic():
    a = Vec3(1.0, 2.0, 3.0)
    b = Vec3(-2.0, 0.5, 4.0)
    assert a + b == Vec3(-1.0, 2.5, 7.0)
    assert a - b == Vec3(3.0, 1.5, -1.0)
    assert a * 2.0 == Vec3(2.0, 4.0, 6.0)
    assert a.dot(b) == pytest.approx(1 * -2 + 2 * 0.5 + 3 * 4)
    assert a.cross(b) == Vec3(2 * 4 - 3 * 0.5, 3 * -2 - 1 * 4, 1 * 0.5 - 2 * -2)
    assert Vec3(3.0, 4.0, 0.0).norm() == pytest.approx(5.0)


def test_vec3_rejects_non_finite():
    with pytest.raises(ValueError):
        Vec3(math.nan, 0.0, 0.0)
    with pytest.raises(ValueError):
        Vec3(0.0, math.inf, 0.0)


def test_quaternion_normalizes():
    q = Quaternion(2.0, 0.0, 0.0, 0.0)
    assert q.w == pytest.approx(1.0)
    n = math.sqrt(q.w**2 + q.x**2 + q.y**2 + q.z**2)
    assert n == pytest.approx(1.0, abs=1e-12)


@given(quats(), quats())
@settings(max_examples=60, deadline=None)
def test_quaternion_product_matches_scipy(a, b):
    ours = a * b
    ref = _scipy_rot(a) * _scipy_rot(b)
    x, y, z, w = ref.as_quat()
    # q and -q are the same rotation
    sign = 1.0 if abs(w - ours.w) < abs(-w - ours.w) else -1.0
    assert ours.w == pytest.approx(sign * w, abs=1e-9)
    assert ours.x == pytest.approx(sign * x, abs=1e-9)
    assert ours.y == pytest.approx(sign * y, abs=1e-9)
    assert ours.z == pytest.approx(sign * z, abs=1e-9)


@given(quats(), vecs())
@settings(max_examples=60, deadline=None)
def test_rotate_matches_scipy(q, v):
    got = q.rotate(v)
    want = _scipy_rot(q).apply([v.x, v.y, v.z])
    assert got.x == pytest.approx(want[0], abs=1e-8)
    assert got.y == pytest.approx(want[1], abs=1e-8)
    assert got.z == pytest.approx(want[2], abs=1e-8)


@given(quats(), vecs())
@settings(max_examples=40, deadline=None)
def test_rotate_matches_matrix(q, v):
    m = q.to_matrix()
    got = q.rotate(v)
    want = m @ np.array([v.x, v.y, v.z])
    assert np.allclose([got.x, got.y, got.z], want, atol=1e-9)


@given(quats())
@settings(max_examples=40, deadline=None)
def test_from_matrix_round_trip(q):
    r = Quaternion.from_matrix(q.to_matrix())
    # same rotation up to sign
    d = abs(q.w * r.w + q.x * r.x + q.y * r.y + q.z * r.z)
    assert d == pytest.approx(1.0, abs=1e-9)


@given(vecs().filter(lambda v: v.norm() > 1e-3), vecs().filter(lambda v: v.norm() > 1e-3))
@settings(max_examples=60, deadline=None)
def test_between_aligns_directions(a, b):
    q = Quaternion.between(a, b)
    got = q.rotate(a)
    want = b * (a.norm() / b.norm())
    assert (got - want).norm() < 1e-6 * max(1.0, a.norm())


def test_between_opposite_vectors():
    q = Quaternion.between(Vec3(1.0, 0.0, 0.0), Vec3(-1.0, 0.0, 0.0))
    got = q.rotate(Vec3(1.0, 0.0, 0.0))
    assert (got - Vec3(-1.0, 0.0, 0.0)).norm() < 1e-9


def test_slerp_endpoints_and_midpoint():
    a = Quaternion.identity()
    b = Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.pi / 2)
    assert slerp(a, b, 0.0).angle_to(a) < 1e-12
    assert slerp(a, b, 1.0).angle_to(b) < 1e-12
    mid = slerp(a, b, 0.5)
    assert mid.angle_to(a) == pytest.approx(math.pi / 4, abs=1e-12)


@given(quats(), quats(), st.floats(0.0, 1.0))
@settings(max_examples=60, deadline=None)
def test_slerp_angle_proportional(a, b, t):
    total = a.angle_to(b)
    q = slerp(a, b, t)
    assert q.angle_to(a) == pytest.approx(t * total, abs=1e-6)


def test_slerp_takes_short_path():
    a = Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 0.1)
    b = Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 0.3)
    flipped = Quaternion(-b.w, -b.x, -b.y, -b.z)
    q = slerp(a, flipped, 0.5)
    assert q.angle_to(Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 0.2)) < 1e-9


def test_look_at_faces_target():
    q = look_at_quaternion(Vec3(0.0, 0.0, 0.0), Vec3(3.0, 4.0, 1.0))
    f = q.rotate(Vec3(1.0, 0.0, 0.0))
    d = Vec3(3.0, 4.0, 1.0)
    want = d * (1.0 / d.norm())
    assert (f - want).norm() < 1e-12


def test_look_at_is_roll_free():
    q = look_at_quaternion(Vec3(1.0, 2.0, 3.0), Vec3(5.0, -1.0, 4.0))
    left = q.rotate(Vec3(0.0, 1.0, 0.0))
    assert abs(left.z) < 1e-12


def test_look_at_degenerate_cases():
    with pytest.raises(DegenerateDirection):
        look_at_quaternion(Vec3(1.0, 1.0, 1.0), Vec3(1.0, 1.0, 1.0))
    with pytest.raises(GimbalCase):
        look_at_quaternion(Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.0, 5.0))
    q = look_at_quaternion(Vec3(0.0, 0.0, 0.0), Vec3(0.0, 0.0, 5.0), up_hint=Vec3(1.0, 0.0, 0.0))
    f = q.rotate(Vec3(1.0, 0.0, 0.0))
    assert (f - Vec3(0.0, 0.0, 1.0)).norm() < 1e-12


def test_camera_pose_forward():
    pose = CameraPose(position=Vec3(0.0, 0.0, 0.0), orientation=Quaternion.identity())
    assert pose.forward() == Vec3(1.0, 0.0, 0.0)
    yaw90 = CameraPose(
        position=Vec3(0.0, 0.0, 0.0),
        orientation=Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), math.pi / 2),
    )
    f = yaw90.forward()
    assert (f - Vec3(0.0, 1.0, 0.0)).norm() < 1e-12


def test_enu_known_offsets():
    origin = GeodeticPoint(0.0, 0.0, 0.0)
    one_deg_lon = enu_from_geodetic(origin, GeodeticPoint(0.0, 1.0, 0.0))
    # equatorial arc length of one degree: R * pi / 180
    assert one_deg_lon.x == pytest.approx(EARTH_RADIUS_M * math.pi / 180.0, rel=1e-12)
    assert one_deg_lon.y == pytest.approx(0.0, abs=1e-9)
    one_deg_lat = enu_from_geodetic(origin, GeodeticPoint(1.0, 0.0, 0.0))
    assert one_deg_lat.y == pytest.approx(EARTH_RADIUS_M * math.pi / 180.0, rel=1e-12)
    up = enu_from_geodetic(origin, GeodeticPoint(0.0, 0.0, 7.5))
    assert up.z == pytest.approx(7.5)


def test_enu_longitude_shrinks_with_latitude():
    origin = GeodeticPoint(60.0, 10.0, 0.0)
    v = enu_from_geodetic(origin, GeodeticPoint(60.0, 11.0, 0.0))
    assert v.x == pytest.approx(EARTH_RADIUS_M * math.pi / 180.0 * 0.5, rel=1e-9)


@given(
    st.floats(-80.0, 80.0), st.floats(-179.0, 179.0),
    st.floats(-500.0, 500.0), st.floats(-500.0, 500.0), st.floats(-50.0, 50.0),
)
@settings(max_examples=60, deadline=None)
def test_enu_round_trip(lat, lon, dx, dy, dz):
    origin = GeodeticPoint(lat, lon, 0.0)
    p = geodetic_from_enu(origin, Vec3(dx, dy, dz))
    v = enu_from_geodetic(origin, p)
    assert v.x == pytest.approx(dx, abs=1e-6)
    assert v.y == pytest.approx(dy, abs=1e-6)
    assert v.z == pytest.approx(dz, abs=1e-9)


def test_geodetic_point_range_checks():
    with pytest.raises(ValueError):
        GeodeticPoint(91.0, 0.0, 0.0)
    with pytest.raises(ValueError):
        GeodeticPoint(0.0, 181.0, 0.0)
