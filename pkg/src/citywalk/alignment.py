"""Registration of locally-tracked camera trajectories to the city model.

A trajectory arrives in an arbitrary local frame (visual-SLAM output): poses
plus a gravity direction measured in that frame, and hand-annotated geodetic
positions of the street's start and end.  Seven parameters describe the
similarity transform into the scene frame:

    v_s, v_e   scene-frame positions of the first and last camera (3 + 3)
    lambda     residual heading correction in radians (1)

The transform is reconstructed as: level the local frame so gravity points
down, scale so the first-to-last camera distance matches |v_e - v_s|, rotate
about z so the levelled trajectory chord points along the v_s -> v_e chord
plus lambda, then translate the first camera onto v_s.

Registration minimizes, over the seven parameters, the number of pixels where
rendered building masks disagree with the reference masks of a sample of
frames, using CMA-ES.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .cmaes import minimize
from .errors import (
    DegenerateStreet,
    GravityDegenerate,
    NoHeldOutFrames,
    NonFiniteObjective,
)
from .geom import (
    CameraPose,
    GeodeticPoint,
    Quaternion,
    Vec3,
    quat_array,
    quat_mult_arrays,
)
from .panorama import PanoMask, discrepancy_count, misalignment_rate, render_building_mask
from .prism_raster import ColumnRefs, PrismRaster, fast_path_ok, is_upright
from .raycast import RayIndex, camera_feasible
from .viewselect import GlobalTrajectory

PARAMS_FORMAT = "alignparams/1"
# one normalized optimizer unit equals 1 m of endpoint shift or 2 deg of heading
LAMBDA_UNIT_RAD = math.radians(2.0)
DEFAULT_SIGMA0 = 3.0
DEFAULT_ITERATIONS = 700
DEFAULT_SAMPLE_COUNT = 30


@dataclass(frozen=True)
class AlignParams:
    v_s: Vec3
    v_e: Vec3
    lambda_rad: float = 0.0


@dataclass
class LocalTrajectory:
    street_id: str
    frames: list[CameraPose]
    gravity: Vec3  # gravity direction measured in the local frame
    start_geodetic: GeodeticPoint
    end_geodetic: GeodeticPoint
    frame_indices: Optional[list[int]] = None

    def indices(self) -> list[int]:
        if self.frame_indices is not None:
            return self.frame_indices
        return list(range(len(self.frames)))


@dataclass(frozen=True)
class SimilarityTransform:
    scale: float
    rotation: Quaternion
    translation: Vec3

    def apply_point(self, p: Vec3) -> Vec3:
        return self.scale * self.rotation.rotate(p) + self.translation

    def apply_pose(self, pose: CameraPose) -> CameraPose:
        return CameraPose(
            position=self.apply_point(pose.position),
            orientation=self.rotation * pose.orientation,
        )


def initial_params(traj: LocalTrajectory, origin: GeodeticPoint,
                   camera_height: float = 2.0, terrain_z=None) -> AlignParams:
    """Endpoint annotations lifted into the scene frame; lambda starts at zero."""
    from .geom import enu_from_geodetic

    vs = enu_from_geodetic(origin, traj.start_geodetic)
    ve = enu_from_geodetic(origin, traj.end_geodetic)
    if terrain_z is not None:
        vs = Vec3(vs.x, vs.y, terrain_z(vs.x, vs.y) + camera_height)
        ve = Vec3(ve.x, ve.y, terrain_z(ve.x, ve.y) + camera_height)
    return AlignParams(v_s=vs, v_e=ve, lambda_rad=0.0)


def build_transform(traj: LocalTrajectory, params: AlignParams) -> SimilarityTransform:
    if len(traj.frames) < 2:
        raise DegenerateStreet(f"street {traj.street_id!r} has {len(traj.frames)} frames")
    p0 = traj.frames[0].position
    p1 = traj.frames[-1].position
    a = p1 - p0
    b = params.v_e - params.v_s
    a_norm = a.norm()
    b_h = math.hypot(b.x, b.y)
    if a_norm < 1.0 or b_h < 1.0:
        raise DegenerateStreet(
            f"street {traj.street_id!r}: chord {a_norm:.3f} m local, {b_h:.3f} m horizontal"
        )
    r_g = Quaternion.between(traj.gravity, Vec3(0.0, 0.0, -1.0))
    a_lv = r_g.rotate(a)
    a_h = math.hypot(a_lv.x, a_lv.y)
    if a_h < 1e-9:
        raise GravityDegenerate(
            f"street {traj.street_id!r} runs parallel to gravity; heading unconstrained"
        )
    phi = math.atan2(a_lv.x * b.y - a_lv.y * b.x, a_lv.x * b.x + a_lv.y * b.y)
    scale = b.norm() / a_norm
    rotation = Quaternion.from_axis_angle(Vec3(0.0, 0.0, 1.0), phi + params.lambda_rad) * r_g
    translation = params.v_s - scale * rotation.rotate(p0)
    return SimilarityTransform(scale=scale, rotation=rotation, translation=translation)


def apply_transform(traj: LocalTrajectory, t: SimilarityTransform) -> GlobalTrajectory:
    return GlobalTrajectory(
        street_id=traj.street_id,
        frames=[t.apply_pose(p) for p in traj.frames],
    )


def canonical_params(traj: LocalTrajectory, params: AlignParams) -> AlignParams:
    """Gauge-fixed representative of the same transform.

    The seven parameters over-determine the five transform degrees of freedom:
    moving v_e on the sphere |v_e - v_s| = const while compensating with
    lambda leaves the transform unchanged, so an optimizer cannot pin the raw
    v_e.  The canonical form expresses the transform by where it actually puts
    the first and last cameras, with lambda folded to zero; ground truth is in
    this form by construction.
    """
    t = build_transform(traj, params)
    return AlignParams(
        v_s=t.apply_point(traj.frames[0].position),
        v_e=t.apply_point(traj.frames[-1].position),
        lambda_rad=0.0,
    )


def heading_error_deg(a: AlignParams, b: AlignParams) -> float:
    """Residual heading between two parameter sets' street chords, degrees."""
    ca = a.v_e - a.v_s
    cb = b.v_e - b.v_s
    da = math.atan2(ca.y, ca.x)
    db = math.atan2(cb.y, cb.x)
    d = (da - db) % (2 * math.pi)
    return math.degrees(min(d, 2 * math.pi - d))


def sample_frames(frame_count: int, n: int = DEFAULT_SAMPLE_COUNT) -> list[int]:
    """n frame positions spread evenly over the trajectory, deduplicated."""
    if frame_count <= 0:
        return []
    if n <= 1 or frame_count == 1:
        return [0]
    raw = [round(k * (frame_count - 1) / (n - 1)) for k in range(n)]
    return sorted(set(raw))


class AlignmentObjective:
    """Total mask discrepancy over the sampled frames as a function of params.

    Uses the column renderer whenever the scene and the candidate poses allow
    it, otherwise renders each frame through the BVH.  Candidate frames whose
    camera lands inside geometry score a full-frame penalty of W*H pixels.
    """

    def __init__(
        self,
        index: RayIndex,
        traj: LocalTrajectory,
        ref_masks: dict[int, PanoMask],
        sampled: list[int],
    ):
        self.index = index
        self.traj = traj
        self.sampled = list(sampled)
        masks = [ref_masks[i] for i in self.sampled]
        self.height, self.width = masks[0].labels.shape
        self.local_pos = np.array(
            [[traj.frames[i].position.x, traj.frames[i].position.y, traj.frames[i].position.z]
             for i in self.sampled]
        )
        self.local_quat = np.array([quat_array(traj.frames[i].orientation) for i in self.sampled])
        self.raster = None
        self.refs = None
        if index.prisms is not None and fast_path_ok(index.prisms):
            self.raster = PrismRaster(index.prisms)
            self.refs = ColumnRefs.from_masks(masks)
        self.ref_labels = [m.labels for m in masks]
        self.calls = 0

    def _transform_poses(self, t: SimilarityTransform):
        rot = t.rotation.to_matrix()
        pos = self.local_pos @ (t.scale * rot).T
        pos[:, 0] += t.translation.x
        pos[:, 1] += t.translation.y
        pos[:, 2] += t.translation.z
        quats = quat_mult_arrays(quat_array(t.rotation)[None, :], self.local_quat)
        return pos, quats

    def __call__(self, params: AlignParams) -> float:
        self.calls += 1
        try:
            t = build_transform(self.traj, params)
        except (DegenerateStreet, GravityDegenerate):
            return float(len(self.sampled) * self.width * self.height)
        pos, quats = self._transform_poses(t)
        if self.raster is not None and np.max(np.abs(quats[:, 1:3])) <= 1e-9:
            yaw = 2.0 * np.arctan2(quats[:, 3], quats[:, 0])
            xyzyaw = np.column_stack([pos, yaw])
            return float(self.raster.discrepancies(xyzyaw, self.refs).sum())
        return float(self._bvh_total(pos, quats))

    def _bvh_total(self, pos, quats) -> int:
        from .citymodel import TriangleMesh

        mesh = TriangleMesh(  # renderer only reads the index; placeholder mesh arg
            vertices=np.zeros((0, 3)), triangles=np.zeros((0, 3), np.int32),
            tri_building=np.zeros(0, np.int32), building_ids=self.index.building_ids,
        )
        total = 0
        for k in range(len(pos)):
            x, y, z = pos[k]
            if self.index.prisms is not None and not camera_feasible(self.index.prisms, x, y, z):
                total += self.width * self.height
                continue
            pose = CameraPose(
                Vec3(x, y, z),
                Quaternion(quats[k, 0], quats[k, 1], quats[k, 2], quats[k, 3]),
            )
            model = render_building_mask(mesh, self.index, pose, self.width, self.height)
            total += discrepancy_count(model, PanoMask(self.ref_labels[k]))
        return total


def _encode(params: AlignParams) -> np.ndarray:
    return np.array(
        [
            params.v_s.x, params.v_s.y, params.v_s.z,
            params.v_e.x, params.v_e.y, params.v_e.z,
            params.lambda_rad / LAMBDA_UNIT_RAD,
        ]
    )


def _decode(x: np.ndarray) -> AlignParams:
    return AlignParams(
        v_s=Vec3(x[0], x[1], x[2]),
        v_e=Vec3(x[3], x[4], x[5]),
        lambda_rad=float(x[6]) * LAMBDA_UNIT_RAD,
    )


def optimize(
    objective,
    init: AlignParams,
    iterations: int = DEFAULT_ITERATIONS,
    seed: int = 0,
    sigma0: float = DEFAULT_SIGMA0,
    ftarget: Optional[float] = 0.0,
) -> tuple[AlignParams, list[float]]:
    """CMA-ES over the normalized 7-vector (meters and 2-degree heading units).

    Returns the best parameters ever sampled and the per-iteration best trace.
    With iterations=0 the initial parameters come back unchanged.
    """
    if iterations <= 0:
        return init, []

    def func(x: np.ndarray) -> float:
        v = float(objective(_decode(x)))
        if not math.isfinite(v):
            raise NonFiniteObjective(f"objective returned {v}")
        return v

    best_x, trace = minimize(
        func, _encode(init), sigma0, iterations, seed=seed, ftarget=ftarget
    )
    return _decode(best_x), trace


@dataclass
class AlignmentReport:
    street_id: str
    params_init: AlignParams
    params_opt: AlignParams
    rate_pre: float
    rate_post: float
    trace: list[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "street_id": self.street_id,
            "params_init": params_to_dict(self.params_init),
            "params_opt": params_to_dict(self.params_opt),
            "rate_pre": self.rate_pre,
            "rate_post": self.rate_post,
            "trace": self.trace,
        }


def held_out_frames(all_frames: list[int], sampled: list[int], stride: int = 5) -> list[int]:
    """Every stride-th frame that optimization never saw."""
    sampled_set = set(sampled)
    held = [i for i in all_frames[::stride] if i not in sampled_set]
    if not held:
        raise NoHeldOutFrames(f"no held-out frames with stride {stride}")
    return held


def masks_at_params(
    index: RayIndex,
    traj: LocalTrajectory,
    params: AlignParams,
    frames: list[int],
    width: int,
    height: int,
) -> list[PanoMask]:
    """Building masks rendered at the transformed poses of the given frames."""
    t = build_transform(traj, params)
    out = []
    raster = None
    if index.prisms is not None and fast_path_ok(index.prisms):
        raster = PrismRaster(index.prisms)
    from .citymodel import TriangleMesh

    mesh = TriangleMesh(
        vertices=np.zeros((0, 3)), triangles=np.zeros((0, 3), np.int32),
        tri_building=np.zeros(0, np.int32), building_ids=index.building_ids,
    )
    for i in frames:
        pose = t.apply_pose(traj.frames[i])
        if raster is not None and is_upright(pose.orientation):
            out.append(raster.render(pose, width, height))
        else:
            out.append(render_building_mask(mesh, index, pose, width, height))
    return out


def evaluate_alignment(
    index: RayIndex,
    traj: LocalTrajectory,
    params_init: AlignParams,
    params_opt: AlignParams,
    ref_masks: dict[int, PanoMask],
    sampled: list[int],
    holdout_stride: int = 5,
    trace: Optional[list[float]] = None,
) -> AlignmentReport:
    """Misalignment rates before and after optimization on held-out frames."""
    all_frames = sorted(ref_masks.keys())
    held = held_out_frames(all_frames, sampled, holdout_stride)
    refs = [ref_masks[i] for i in held]
    h, w = refs[0].labels.shape
    pre = masks_at_params(index, traj, params_init, held, w, h)
    post = masks_at_params(index, traj, params_opt, held, w, h)
    return AlignmentReport(
        street_id=traj.street_id,
        params_init=params_init,
        params_opt=params_opt,
        rate_pre=misalignment_rate(pre, refs),
        rate_post=misalignment_rate(post, refs),
        trace=trace or [],
    )


def params_to_dict(params: AlignParams) -> dict:
    return {
        "v_s": [params.v_s.x, params.v_s.y, params.v_s.z],
        "v_e": [params.v_e.x, params.v_e.y, params.v_e.z],
        "lambda_rad": params.lambda_rad,
    }


def params_to_json(params: AlignParams) -> str:
    d = {"format": PARAMS_FORMAT}
    d.update(params_to_dict(params))
    return json.dumps(d, sort_keys=True, separators=(",", ":"))


def params_from_json(text: str) -> AlignParams:
    d = json.loads(text)
    if d.get("format") != PARAMS_FORMAT:
        raise ValueError(f"unsupported params format: {d.get('format')!r}")
    return AlignParams(
        v_s=Vec3(*d["v_s"]),
        v_e=Vec3(*d["v_e"]),
        lambda_rad=float(d["lambda_rad"]),
    )


def write_local_trajectory(traj: LocalTrajectory) -> str:
    """Plain-text trajectory: header comments, then one pose per line as
    ``frame_index tx ty tz qx qy qz qw`` (quaternion scalar-last on disk)."""
    lines = [
        f"#street {traj.street_id}",
        f"#gravity {traj.gravity.x!r} {traj.gravity.y!r} {traj.gravity.z!r}",
        f"#start {traj.start_geodetic.lat_deg!r} {traj.start_geodetic.lon_deg!r}",
        f"#end {traj.end_geodetic.lat_deg!r} {traj.end_geodetic.lon_deg!r}",
    ]
    for idx, pose in zip(traj.indices(), traj.frames):
        p = pose.position
        q = pose.orientation
        lines.append(f"{idx} {p.x!r} {p.y!r} {p.z!r} {q.x!r} {q.y!r} {q.z!r} {q.w!r}")
    return "\n".join(lines) + "\n"


def read_local_trajectory(text: str) -> LocalTrajectory:
    street_id = ""
    gravity = Vec3(0.0, 0.0, -1.0)
    start = end = None
    indices: list[int] = []
    frames: list[CameraPose] = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, rest = line[1:].partition(" ")
            vals = rest.split()
            if key == "street":
                street_id = rest.strip()
            elif key == "gravity":
                gravity = Vec3(float(vals[0]), float(vals[1]), float(vals[2]))
            elif key == "start":
                start = GeodeticPoint(float(vals[0]), float(vals[1]))
            elif key == "end":
                end = GeodeticPoint(float(vals[0]), float(vals[1]))
            continue
        f = line.split()
        if len(f) != 8:
            raise ValueError(f"trajectory line needs 8 fields, got {len(f)}: {line!r}")
        indices.append(int(f[0]))
        tx, ty, tz, qx, qy, qz, qw = (float(v) for v in f[1:])
        frames.append(CameraPose(Vec3(tx, ty, tz), Quaternion(qw, qx, qy, qz)))
    if start is None or end is None:
        raise ValueError("trajectory missing #start or #end annotation")
    return LocalTrajectory(
        street_id=street_id,
        frames=frames,
        gravity=gravity,
        start_geodetic=start,
        end_geodetic=end,
        frame_indices=indices,
    )
