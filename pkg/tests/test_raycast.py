import math

import numpy as np
import pytest

from citywalk.citymodel import Building, scene_to_mesh
from citywalk.errors import CameraInsideGeometry
from citywalk.geom import CameraPose, Quaternion, Vec3
from citywalk.panorama import BUILDING, render_building_mask
from citywalk.prism_raster import PrismRaster, is_upright, yaw_of
from citywalk.raycast import any_hit, build_ray_index, camera_feasible, closest_hit
from conftest import box_scene


def brute_force_closest(mesh, origin, direction):
    """Independent all-triangles Moller-Trumbore sweep."""
    o = np.asarray(origin, dtype=np.float64)
    d = np.asarray(direction, dtype=np.float64)
    v0 = mesh.vertices[mesh.triangles[:, 0]]
    v1 = mesh.vertices[mesh.triangles[:, 1]]
    v2 = mesh.vertices[mesh.triangles[:, 2]]
    e1 = v1 - v0
    e2 = v2 - v0
    p = np.cross(d, e2)
    det = np.einsum("ij,ij->i", e1, p)
    ok = np.abs(det) > 1e-12
    inv = np.where(ok, 1.0 / np.where(ok, det, 1.0), 0.0)
    s = o - v0
    u = np.einsum("ij,ij->i", s, p) * inv
    q = np.cross(s, e1)
    v = np.einsum("j,ij->i", d, q) * inv
    t = np.einsum("ij,ij->i", e2, q) * inv
    hit = ok & (u >= -1e-12) & (v >= -1e-12) & (u + v <= 1 + 1e-12) & (t > 1e-9)
    if not np.any(hit):
        return math.inf, -1
    ts = np.where(hit, t, np.inf)
    i = int(np.argmin(ts))
    return float(ts[i]), i


@pytest.fixture(scope="module")
def simple():
    scene = box_scene()
    mesh = scene_to_mesh(scene)
    return scene, mesh, build_ray_index(mesh, scene)


def test_axis_ray_hits_near_wall(simple):
    scene, mesh, index = simple
    t, ti = closest_hit(index, (0.0, 0.0, 5.0), (1.0, 0.0, 0.0))
    assert t == pytest.approx(20.0)  # wall plane x = 20
    assert index.tri_building[ti] >= 0


def test_ray_misses_into_sky(simple):
    scene, mesh, index = simple
    t, ti = closest_hit(index, (0.0, 0.0, 5.0), (0.0, 0.0, 1.0))
    assert ti == -1 and math.isinf(t)


def test_downward_ray_hits_terrain(simple):
    scene, mesh, index = simple
    t, ti = closest_hit(index, (0.0, 0.0, 5.0), (0.0, 0.0, -1.0))
    assert t == pytest.approx(5.0)
    assert index.tri_building[ti] == -1


def test_any_hit_respects_tmax(simple):
    scene, mesh, index = simple
    assert any_hit(index, (0.0, 0.0, 5.0), (1.0, 0.0, 0.0))
    assert not any_hit(index, (0.0, 0.0, 5.0), (1.0, 0.0, 0.0), tmax=19.0)
    assert any_hit(index, (0.0, 0.0, 5.0), (1.0, 0.0, 0.0), tmax=21.0)


def test_bvh_matches_brute_force_on_random_rays(simple):
    scene, mesh, index = simple
    rng = np.random.default_rng(7)
    for _ in range(300):
        o = rng.uniform([-40, -40, 0.5], [60, 40, 30])
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        t_ref, _ = brute_force_closest(mesh, o, d)
        t_got, ti = closest_hit(index, tuple(o), tuple(d))
        if math.isinf(t_ref):
            assert ti == -1
        else:
            assert t_got == pytest.approx(t_ref, rel=1e-9, abs=1e-9)


def test_bvh_matches_brute_force_many_buildings():
    rng = np.random.default_rng(11)
    extra = []
    for k in range(12):
        x = -80 + 28 * (k % 5)
        y = -60 + 30 * (k // 5)
        w, h = rng.uniform(6, 14, size=2)
        extra.append(
            Building(
                id=f"x{k}",
                footprint=np.array([[x, y], [x + w, y], [x + w, y + h], [x, y + h]]),
                base_elevation=0.0,
                height=float(rng.uniform(5, 25)),
            )
        )
    scene = box_scene(extra_buildings=extra)
    mesh = scene_to_mesh(scene)
    index = build_ray_index(mesh, scene)
    for _ in range(200):
        o = rng.uniform([-90, -70, 0.5], [60, 40, 30])
        d = rng.normal(size=3)
        d /= np.linalg.norm(d)
        t_ref, _ = brute_force_closest(mesh, o, d)
        t_got, ti = closest_hit(index, tuple(o), tuple(d))
        if math.isinf(t_ref):
            assert ti == -1
        else:
            assert t_got == pytest.approx(t_ref, rel=1e-9, abs=1e-9)


def test_camera_feasibility(simple):
    scene, mesh, index = simple
    p = index.prisms
    assert camera_feasible(p, 0.0, 0.0, 2.0)
    assert not camera_feasible(p, 25.0, 0.0, 5.0)  # inside the box
    assert camera_feasible(p, 25.0, 0.0, 10.5)  # above its roof
    assert not camera_feasible(p, 0.0, 0.0, -0.5)  # below the terrain


def test_render_rejects_camera_inside_building(simple):
    scene, mesh, index = simple
    pose = CameraPose(position=Vec3(25.0, 0.0, 5.0), orientation=Quaternion.identity())
    with pytest.raises(CameraInsideGeometry):
        render_building_mask(mesh, index, pose, 64, 32)


def test_upright_detection():
    assert is_upright(Quaternion.identity())
    yaw = Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), 1.234)
    assert is_upright(yaw)
    assert yaw_of(yaw) == pytest.approx(1.234)
    tilted = Quaternion.from_axis_angle(Vec3(0.0, 1.0, 0.0), 0.01)
    assert not is_upright(tilted)


def _random_city(rng, n=7):
    extra = []
    spots = rng.permutation(16)[:n]
    for k, s in enumerate(spots):
        x = -70 + 35 * (s % 4)
        y = -70 + 35 * (s // 4)
        w, h = rng.uniform(8, 20, size=2)
        extra.append(
            Building(
                id=f"r{k}",
                footprint=np.array([[x, y], [x + w, y], [x + w, y + h], [x, y + h]]),
                base_elevation=0.0,
                height=float(rng.uniform(4, 30)),
            )
        )
    return box_scene(extra_buildings=extra)


def test_column_renderer_matches_bvh_exactly():
    """The two mask paths must agree bit for bit for upright cameras."""
    rng = np.random.default_rng(3)
    for trial in range(6):
        scene = _random_city(rng)
        mesh = scene_to_mesh(scene)
        index = build_ray_index(mesh, scene)
        raster = PrismRaster(index.prisms)
        placed = 0
        while placed < 4:
            p = rng.uniform([-60, -60], [55, 55])
            z = rng.uniform(1.0, 12.0)
            if not camera_feasible(index.prisms, p[0], p[1], z):
                continue
            placed += 1
            yaw = rng.uniform(0, 2 * math.pi)
            pose = CameraPose(
                position=Vec3(p[0], p[1], z),
                orientation=Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), yaw),
            )
            a = render_building_mask(mesh, index, pose, 128, 64)
            b = raster.render(pose, 128, 64)
            assert np.array_equal(a.labels, b.labels), f"trial {trial} pose {pose}"


def test_column_renderer_camera_over_building_roof():
    scene = box_scene()
    mesh = scene_to_mesh(scene)
    index = build_ray_index(mesh, scene)
    raster = PrismRaster(index.prisms)
    # inside the footprint column, above the roof: crossing parity is odd
    pose = CameraPose(position=Vec3(25.0, 0.0, 14.0), orientation=Quaternion.identity())
    a = render_building_mask(mesh, index, pose, 128, 64)
    b = raster.render(pose, 128, 64)
    assert np.array_equal(a.labels, b.labels)
    assert (a.labels == BUILDING).sum() > 0  # the roof fills the lower view
