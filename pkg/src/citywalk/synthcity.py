"""Synthetic benchmark city with ground-truth trajectories.

A Manhattan grid of rectangular buildings, streets running between the
blocks.  For each street the generator produces the true scene-frame camera
trajectory plus the same trajectory expressed in a random local frame (random
similarity transform, optional scale drift and gravity error), so that
registration can be scored against exact ground truth: the true parameters
are simply (first frame position, last frame position, lambda = 0).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .alignment import AlignParams, LocalTrajectory
from .citymodel import Building, CityScene, TerrainGrid, terrain_elevation
from .geom import CameraPose, GeodeticPoint, Quaternion, Vec3, geodetic_from_enu
from .panorama import OCCLUDED, PanoMask, render_building_mask
from .prism_raster import PrismRaster, fast_path_ok, is_upright
from .raycast import RayIndex
from .viewselect import GlobalTrajectory

DEFAULT_CAMERA_HEIGHT_M = 2.0


@dataclass
class SynthSpec:
    seed: int = 0
    block_rows: int = 3
    block_cols: int = 3
    block_size_m: float = 30.0
    street_width_m: float = 12.0
    footprint_min_m: float = 16.0
    footprint_max_m: float = 26.0
    height_min_m: float = 8.0
    height_max_m: float = 30.0
    terrain_slope: float = 0.0  # dz/dx; nonzero slopes disable the column renderer
    frames_per_street: int = 150
    camera_height_m: float = DEFAULT_CAMERA_HEIGHT_M
    jitter_m: float = 0.05  # per-frame position jitter
    yaw_jitter_deg: float = 0.5
    drift_m: float = 0.3  # amplitude of a slow lateral meander
    scale_error: float = 1.0  # multiplicative drift of the local frame's scale
    gravity_error_deg: float = 0.0
    origin: GeodeticPoint = GeodeticPoint(35.68, 139.76, 0.0)

    @property
    def pitch(self) -> float:
        return self.block_size_m + self.street_width_m


def street_count(spec: SynthSpec) -> int:
    return (spec.block_cols + 1) + (spec.block_rows + 1)


def generate_city(spec: SynthSpec) -> CityScene:
    rng = np.random.default_rng(spec.seed)
    pitch = spec.pitch
    sw = spec.street_width_m
    buildings = []
    for r in range(spec.block_rows):
        for c in range(spec.block_cols):
            bx0 = c * pitch + sw / 2
            by0 = r * pitch + sw / 2
            avail = spec.block_size_m - 2.0
            w = rng.uniform(spec.footprint_min_m, min(spec.footprint_max_m, avail))
            d = rng.uniform(spec.footprint_min_m, min(spec.footprint_max_m, avail))
            cx = bx0 + 1.0 + w / 2 + rng.uniform(0.0, avail - w)
            cy = by0 + 1.0 + d / 2 + rng.uniform(0.0, avail - d)
            h = rng.uniform(spec.height_min_m, spec.height_max_m)
            fp = np.array(
                [
                    [cx - w / 2, cy - d / 2],
                    [cx + w / 2, cy - d / 2],
                    [cx + w / 2, cy + d / 2],
                    [cx - w / 2, cy + d / 2],
                ]
            )
            buildings.append(
                Building(
                    id=f"b{r}{c}",
                    footprint=fp,
                    base_elevation=0.0,
                    height=float(h),
                    attributes={"height": f"{h:.2f}"},
                )
            )

    x1 = spec.block_cols * pitch + pitch
    y1 = spec.block_rows * pitch + pitch
    x0 = -pitch
    y0 = -pitch
    side = max(x1 - x0, y1 - y0)
    if spec.terrain_slope == 0.0:
        values = np.zeros((2, 2), dtype=np.float64)
    else:
        values = np.array(
            [[x0, x0 + side], [x0, x0 + side]], dtype=np.float64
        ) * spec.terrain_slope
    terrain = TerrainGrid(origin_x=x0, origin_y=y0, cell=side, values=values)
    if spec.terrain_slope != 0.0:
        for b in buildings:
            cx, cy = b.centroid()
            b.base_elevation = terrain_elevation(terrain, cx, cy)
    return CityScene(origin=spec.origin, buildings=buildings, terrain=terrain, water=[])


def street_endpoints(spec: SynthSpec, street: int) -> tuple[Vec3, Vec3]:
    """Centerline endpoints of street k: verticals first, then horizontals."""
    pitch = spec.pitch
    n_v = spec.block_cols + 1
    if street < 0 or street >= street_count(spec):
        raise ValueError(f"street index {street} out of range")
    if street < n_v:
        x = street * pitch
        return Vec3(x, 0.0, 0.0), Vec3(x, spec.block_rows * pitch, 0.0)
    i = street - n_v
    y = i * pitch
    return Vec3(0.0, y, 0.0), Vec3(spec.block_cols * pitch, y, 0.0)


def street_name(spec: SynthSpec, street: int) -> str:
    n_v = spec.block_cols + 1
    return f"v{street}" if street < n_v else f"h{street - n_v}"


def _random_quaternion(rng: np.random.Generator) -> Quaternion:
    q = rng.standard_normal(4)
    return Quaternion(q[0], q[1], q[2], q[3])


@dataclass
class StreetTruth:
    street_id: str
    local: LocalTrajectory
    global_traj: GlobalTrajectory
    gt_params: AlignParams
    scale: float
    rotation: Quaternion
    translation: Vec3


def generate_street(
    scene: CityScene,
    spec: SynthSpec,
    street: int,
    seed: int,
    base_transform: tuple[float, Quaternion, Vec3] | None = None,
) -> StreetTruth:
    """True trajectory along one street plus its random-local-frame version."""
    rng = np.random.default_rng(seed)
    s_pt, e_pt = street_endpoints(spec, street)
    F = spec.frames_per_street
    dirv = (e_pt - s_pt).normalized()
    perp = Vec3(-dirv.y, dirv.x, 0.0)
    base_yaw = math.atan2(e_pt.y - s_pt.y, e_pt.x - s_pt.x)

    frames = []
    for k in range(F):
        t = k / (F - 1)
        p = s_pt + t * (e_pt - s_pt)
        lat = spec.drift_m * math.sin(2.0 * math.pi * t) + rng.normal(0.0, spec.jitter_m)
        lon = rng.normal(0.0, spec.jitter_m)
        x = p.x + lat * perp.x + lon * dirv.x
        y = p.y + lat * perp.y + lon * dirv.y
        z = (
            terrain_elevation(scene.terrain, x, y)
            + spec.camera_height_m
            + rng.normal(0.0, spec.jitter_m)
        )
        yaw = base_yaw + math.radians(rng.normal(0.0, spec.yaw_jitter_deg))
        frames.append(CameraPose(Vec3(x, y, z), Quaternion.from_axis_angle(Vec3(0, 0, 1), yaw)))

    if base_transform is None:
        s0 = math.exp(rng.uniform(math.log(0.5), math.log(2.0)))
        q0 = _random_quaternion(rng)
        t0 = Vec3(*rng.uniform(-200.0, 200.0, size=3))
    else:
        s0, q0, t0 = base_transform
    q_inv = q0.inverse()
    inv_scale = 1.0 / (s0 * spec.scale_error)

    local_frames = []
    for f in frames:
        lp = inv_scale * q_inv.rotate(f.position - t0)
        local_frames.append(CameraPose(lp, q_inv * f.orientation))

    gravity = q_inv.rotate(Vec3(0.0, 0.0, -1.0))
    if spec.gravity_error_deg > 0.0:
        axis = Vec3(*rng.standard_normal(3))
        tilt = Quaternion.from_axis_angle(axis, math.radians(spec.gravity_error_deg))
        gravity = tilt.rotate(gravity)

    sid = street_name(spec, street)
    local = LocalTrajectory(
        street_id=sid,
        frames=local_frames,
        gravity=gravity,
        start_geodetic=geodetic_from_enu(scene.origin, frames[0].position),
        end_geodetic=geodetic_from_enu(scene.origin, frames[-1].position),
    )
    return StreetTruth(
        street_id=sid,
        local=local,
        global_traj=GlobalTrajectory(street_id=sid, frames=frames),
        gt_params=AlignParams(v_s=frames[0].position, v_e=frames[-1].position, lambda_rad=0.0),
        scale=s0,
        rotation=q0,
        translation=t0,
    )


def _inject_occluders(
    labels: np.ndarray, fraction: float, rng: np.random.Generator
) -> np.ndarray:
    """Paint random OCCLUDED rectangles until the occluded share reaches the
    requested fraction within 0.02."""
    H, W = labels.shape
    target = fraction * W * H
    out = labels.copy()
    guard = 0
    while np.count_nonzero(out == OCCLUDED) < target - 0.0075 * W * H:
        guard += 1
        if guard > 10000:
            break
        w = int(rng.integers(W // 32, W // 10 + 1))
        h = int(rng.integers(H // 32, H // 8 + 1))
        u = int(rng.integers(0, W - w + 1))
        v = int(rng.integers(0, H - h + 1))
        out[v : v + h, u : u + w] = OCCLUDED
    return out


def render_reference_masks(
    index: RayIndex,
    traj: GlobalTrajectory,
    occluder_fraction: float = 0.1,
    seed: int = 0,
    width: int = 512,
    height: int = 256,
) -> dict[int, PanoMask]:
    """Building masks at the true poses, with synthetic occluder rectangles
    standing in for the segmentation noise of real footage."""
    rng = np.random.default_rng(seed)
    raster = None
    if index.prisms is not None and fast_path_ok(index.prisms):
        raster = PrismRaster(index.prisms)
    from .citymodel import TriangleMesh

    mesh = TriangleMesh(
        vertices=np.zeros((0, 3)), triangles=np.zeros((0, 3), np.int32),
        tri_building=np.zeros(0, np.int32), building_ids=index.building_ids,
    )
    out: dict[int, PanoMask] = {}
    for i, pose in enumerate(traj.frames):
        if raster is not None and is_upright(pose.orientation):
            mask = raster.render(pose, width, height)
        else:
            mask = render_building_mask(mesh, index, pose, width, height)
        if occluder_fraction > 0.0:
            out[i] = PanoMask(_inject_occluders(mask.labels, occluder_fraction, rng))
        else:
            out[i] = mask
    return out


def perturb_params(
    gt: AlignParams,
    scene: CityScene,
    endpoint_sigma_m: float,
    lambda_sigma_deg: float,
    seed: int,
    camera_height_m: float = DEFAULT_CAMERA_HEIGHT_M,
) -> AlignParams:
    """Simulated annotation error: Gaussian per-axis horizontal offsets on both
    endpoints (z re-derived from the terrain) and a Gaussian heading error."""
    rng = np.random.default_rng(seed)

    def shift(v: Vec3) -> Vec3:
        x = v.x + rng.normal(0.0, endpoint_sigma_m)
        y = v.y + rng.normal(0.0, endpoint_sigma_m)
        return Vec3(x, y, terrain_elevation(scene.terrain, x, y) + camera_height_m)

    return AlignParams(
        v_s=shift(gt.v_s),
        v_e=shift(gt.v_e),
        lambda_rad=math.radians(rng.normal(0.0, lambda_sigma_deg)),
    )
