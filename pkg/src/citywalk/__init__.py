"""Street-level trajectory registration against CityGML city models, with an
interactive avatar walkthrough service and flood/daylight overlays."""

from .alignment import (
    AlignParams,
    AlignmentObjective,
    AlignmentReport,
    LocalTrajectory,
    SimilarityTransform,
    apply_transform,
    build_transform,
    canonical_params,
    evaluate_alignment,
    heading_error_deg,
    initial_params,
    optimize,
    params_from_json,
    params_to_json,
    read_local_trajectory,
    sample_frames,
    write_local_trajectory,
)
from .benchmark import BenchConfig, BenchResult, format_summary, run_benchmark
from .citygml import parse_citygml
from .citymodel import (
    Building,
    CityScene,
    TerrainGrid,
    TriangleMesh,
    WaterBody,
    scene_from_json,
    scene_to_json,
    scene_to_mesh,
    terrain_elevation,
)
from .geom import (
    CameraPose,
    GeodeticPoint,
    Quaternion,
    Vec3,
    enu_from_geodetic,
    geodetic_from_enu,
    look_at_quaternion,
    slerp,
)
from .overlays import SHADOW, WATER, compose_overlays, flood_depth, shadow_mask, water_mask
from .panorama import (
    BUILDING,
    NON_BUILDING,
    OCCLUDED,
    PanoMask,
    discrepancy_count,
    misalignment_rate,
    pixel_ray,
    read_mask,
    render_building_mask,
    write_mask,
)
from .raycast import RayIndex, build_ray_index
from .service import Session, WalkEngine
from .solar import SunState, sun_position
from .synthcity import SynthSpec, generate_city, generate_street, perturb_params, render_reference_masks
from .viewselect import (
    AvatarState,
    GlobalTrajectory,
    ViewState,
    initial_view,
    maybe_handover,
    signed_forward_distance,
    step,
    update_orientation,
    update_viewpoint,
)

__all__ = [name for name in dir() if not name.startswith("_")]
