"""Flood water and sun shadow overlays for panorama frames.

Overlay grids share the panorama pixel mapping and use disjoint bit values,
so layers combine by bitwise union: WATER = 64, SHADOW = 32.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .citymodel import CityScene, WaterBody, terrain_elevation
from .errors import (
    OutOfBounds,
    SunBelowHorizon,
    UnknownBuilding,
    UnknownScenario,
)
from .geom import CameraPose
from .panorama import angle_tables
from .polygon import point_in_polygon
from .raycast import RayIndex, _any_hit, _closest_hit
from .solar import SunState

WATER = 64
SHADOW = 32

# offset along the sun direction before the occlusion ray, to clear the
# surface the primary ray just hit
_SHADOW_BIAS_M = 1e-2


def flood_depth(scene: CityScene, building_id: str, scenario_id: str) -> float:
    """Water depth at a building for one flood scenario.

    A ``flood_depth:<scenario>`` attribute wins over geometry.  Otherwise the
    depth is the water level minus the terrain at the footprint centroid,
    clamped at zero, and zero for buildings outside the scenario extent.
    """
    b = scene.building(building_id)
    if b is None:
        raise UnknownBuilding(building_id)
    w = scene.scenario(scenario_id)
    if w is None:
        raise UnknownScenario(scenario_id)
    attr = b.attributes.get(f"flood_depth:{scenario_id}")
    if attr is not None:
        return float(attr)
    cx, cy = b.centroid()
    if not point_in_polygon(cx, cy, w.extent):
        return 0.0
    try:
        ground = terrain_elevation(scene.terrain, cx, cy)
    except OutOfBounds:
        return 0.0
    return max(0.0, w.level - ground)


@njit(cache=True, inline="always")
def _in_poly(px, py, xs, ys):
    n = len(xs)
    inside = False
    for i in range(n):
        x1 = xs[i]
        y1 = ys[i]
        x2 = xs[(i + 1) % n]
        y2 = ys[(i + 1) % n]
        if (y1 > py) != (y2 > py):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xint:
                inside = not inside
    return inside


@njit(cache=True, parallel=True)
def _water_kernel(
    ox, oy, oz, rot, level, xs, ys,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, v1, v2,
    cos_psi, sin_psi, cos_phi, sin_phi,
    out, water_label,
):
    H = out.shape[0]
    W = out.shape[1]
    for vrow in prange(H):
        cp = cos_psi[vrow]
        sp = sin_psi[vrow]
        for u in range(W):
            cx = cp * cos_phi[u]
            cy = cp * sin_phi[u]
            cz = sp
            dx = rot[0, 0] * cx + rot[0, 1] * cy + rot[0, 2] * cz
            dy = rot[1, 0] * cx + rot[1, 1] * cy + rot[1, 2] * cz
            dz = rot[2, 0] * cx + rot[2, 1] * cy + rot[2, 2] * cz
            out[vrow, u] = 0
            if dz == 0.0:
                continue
            t = (level - oz) / dz
            if t <= 1e-9:
                continue
            hx = ox + t * dx
            hy = oy + t * dy
            if not _in_poly(hx, hy, xs, ys):
                continue
            tm, _ = _closest_hit(
                ox, oy, oz, dx, dy, dz,
                node_min, node_max, node_left, node_right, node_start, node_count,
                v0, v1, v2,
            )
            if t < tm:
                out[vrow, u] = water_label


@njit(cache=True, parallel=True)
def _shadow_kernel(
    ox, oy, oz, rot, sx, sy, sz,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, v1, v2,
    cos_psi, sin_psi, cos_phi, sin_phi,
    out, shadow_label, bias,
):
    H = out.shape[0]
    W = out.shape[1]
    for vrow in prange(H):
        cp = cos_psi[vrow]
        sp = sin_psi[vrow]
        for u in range(W):
            cx = cp * cos_phi[u]
            cy = cp * sin_phi[u]
            cz = sp
            dx = rot[0, 0] * cx + rot[0, 1] * cy + rot[0, 2] * cz
            dy = rot[1, 0] * cx + rot[1, 1] * cy + rot[1, 2] * cz
            dz = rot[2, 0] * cx + rot[2, 1] * cy + rot[2, 2] * cz
            out[vrow, u] = 0
            t, ti = _closest_hit(
                ox, oy, oz, dx, dy, dz,
                node_min, node_max, node_left, node_right, node_start, node_count,
                v0, v1, v2,
            )
            if ti < 0:
                continue
            px = ox + t * dx + bias * sx
            py = oy + t * dy + bias * sy
            pz = oz + t * dz + bias * sz
            if _any_hit(
                px, py, pz, sx, sy, sz, np.inf,
                node_min, node_max, node_left, node_right, node_start, node_count,
                v0, v1, v2,
            ):
                out[vrow, u] = shadow_label


@dataclass
class WaterOverlay:
    grid: np.ndarray  # (H, W) uint8, 0 or WATER
    camera_under_water: bool


def water_mask(
    index: RayIndex, pose: CameraPose, scenario: WaterBody, width: int, height: int
) -> WaterOverlay:
    """WATER where the ray reaches the scenario's water surface before any
    scene geometry."""
    cos_psi, sin_psi, cos_phi, sin_phi = angle_tables(width, height)
    out = np.empty((height, width), dtype=np.uint8)
    p = pose.position
    ext = np.asarray(scenario.extent, dtype=np.float64)
    _water_kernel(
        p.x, p.y, p.z, pose.orientation.to_matrix(), scenario.level,
        np.ascontiguousarray(ext[:, 0]), np.ascontiguousarray(ext[:, 1]),
        index.node_min, index.node_max, index.node_left, index.node_right,
        index.node_start, index.node_count, index.v0, index.v1, index.v2,
        cos_psi, sin_psi, cos_phi, sin_phi,
        out, np.uint8(WATER),
    )
    under = p.z < scenario.level and point_in_polygon(p.x, p.y, ext)
    return WaterOverlay(grid=out, camera_under_water=under)


def shadow_mask(
    index: RayIndex, pose: CameraPose, sun: SunState, width: int, height: int
) -> np.ndarray:
    """SHADOW on every visible surface point something blocks from the sun.

    The sun is a parallel light; an occlusion ray starts a centimeter off the
    primary hit toward the sun.  Raises SunBelowHorizon when elevation <= 0.
    """
    if not sun.above_horizon:
        raise SunBelowHorizon(f"sun elevation {sun.elevation_deg:.2f} deg")
    cos_psi, sin_psi, cos_phi, sin_phi = angle_tables(width, height)
    out = np.empty((height, width), dtype=np.uint8)
    p = pose.position
    s = sun.direction()
    _shadow_kernel(
        p.x, p.y, p.z, pose.orientation.to_matrix(), s.x, s.y, s.z,
        index.node_min, index.node_max, index.node_left, index.node_right,
        index.node_start, index.node_count, index.v0, index.v1, index.v2,
        cos_psi, sin_psi, cos_phi, sin_phi,
        out, np.uint8(SHADOW), _SHADOW_BIAS_M,
    )
    return out


def compose_overlays(*grids: np.ndarray) -> np.ndarray:
    """Bitwise union of overlay layers (labels use disjoint bits)."""
    if not grids:
        raise ValueError("need at least one overlay grid")
    out = grids[0].copy()
    for g in grids[1:]:
        if g.shape != out.shape:
            raise ValueError(f"overlay shapes differ: {g.shape} vs {out.shape}")
        out |= g
    return out
