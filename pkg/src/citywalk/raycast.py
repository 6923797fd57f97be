"""Triangle-mesh ray casting over a bounding-volume hierarchy.

The BVH is flattened into plain arrays so the traversal kernels can run under
numba.  Kernels work in float64; the closest-hit tolerance (1e-9 along the
ray) holds even for scenes megameters from the origin.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numba
import numpy as np
from numba import njit, prange

from .citymodel import CityScene, TriangleMesh
from .polygon import ensure_ccw

_LEAF_SIZE = 4
_EPS_PARALLEL = 1e-12
_T_MIN = 1e-9


@dataclass
class PrismTables:
    """Footprint prisms and terrain grid in kernel-friendly arrays.

    Used for camera-inside tests and for the upright-camera column renderer.
    """

    edge_x1: np.ndarray
    edge_y1: np.ndarray
    edge_x2: np.ndarray
    edge_y2: np.ndarray
    bld_edge_off: np.ndarray  # (B+1,) CSR offsets into edge arrays
    bld_base: np.ndarray
    bld_top: np.ndarray
    bld_bbox: np.ndarray  # (B, 4) xmin ymin xmax ymax
    terrain_x0: float
    terrain_y0: float
    terrain_cell: float
    terrain_values: np.ndarray
    flat_elevation: float  # nan when the terrain is not a single level

    @staticmethod
    def from_scene(scene: CityScene) -> "PrismTables":
        xs1, ys1, xs2, ys2 = [], [], [], []
        off = [0]
        base, top, bbox = [], [], []
        for b in scene.buildings:
            fp = ensure_ccw(np.asarray(b.footprint, dtype=np.float64))
            n = len(fp)
            for i in range(n):
                j = (i + 1) % n
                xs1.append(fp[i, 0])
                ys1.append(fp[i, 1])
                xs2.append(fp[j, 0])
                ys2.append(fp[j, 1])
            off.append(len(xs1))
            base.append(b.base_elevation)
            top.append(b.base_elevation + b.height)
            bbox.append(
                (
                    float(np.min(fp[:, 0])),
                    float(np.min(fp[:, 1])),
                    float(np.max(fp[:, 0])),
                    float(np.max(fp[:, 1])),
                )
            )
        t = scene.terrain
        vals = np.asarray(t.values, dtype=np.float64)
        flat = float(vals.flat[0]) if np.ptp(vals) == 0.0 else float("nan")
        return PrismTables(
            edge_x1=np.array(xs1, dtype=np.float64),
            edge_y1=np.array(ys1, dtype=np.float64),
            edge_x2=np.array(xs2, dtype=np.float64),
            edge_y2=np.array(ys2, dtype=np.float64),
            bld_edge_off=np.array(off, dtype=np.int32),
            bld_base=np.array(base, dtype=np.float64),
            bld_top=np.array(top, dtype=np.float64),
            bld_bbox=np.array(bbox, dtype=np.float64).reshape(-1, 4),
            terrain_x0=t.origin_x,
            terrain_y0=t.origin_y,
            terrain_cell=t.cell,
            terrain_values=vals,
            flat_elevation=flat,
        )


@dataclass
class RayIndex:
    """Flattened BVH over a triangle mesh plus optional prism metadata."""

    v0: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    tri_building: np.ndarray  # (m,) int32, reordered to match v0..v2
    node_min: np.ndarray
    node_max: np.ndarray
    node_left: np.ndarray
    node_right: np.ndarray
    node_start: np.ndarray
    node_count: np.ndarray
    building_ids: list[str]
    prisms: Optional[PrismTables] = None


def build_ray_index(mesh: TriangleMesh, scene: Optional[CityScene] = None) -> RayIndex:
    """Median-split BVH; leaves hold at most four triangles."""
    tris = mesh.triangles
    m = len(tris)
    va = mesh.vertices[tris[:, 0]]
    vb = mesh.vertices[tris[:, 1]]
    vc = mesh.vertices[tris[:, 2]]
    lo = np.minimum(np.minimum(va, vb), vc)
    hi = np.maximum(np.maximum(va, vb), vc)
    cent = (lo + hi) * 0.5

    order = np.arange(m)
    node_min, node_max = [], []
    node_left, node_right, node_start, node_count = [], [], [], []

    def new_node():
        node_min.append(None)
        node_max.append(None)
        node_left.append(-1)
        node_right.append(-1)
        node_start.append(0)
        node_count.append(0)
        return len(node_min) - 1

    def build(start: int, count: int) -> int:
        ni = new_node()
        idx = order[start : start + count]
        node_min[ni] = lo[idx].min(axis=0)
        node_max[ni] = hi[idx].max(axis=0)
        if count <= _LEAF_SIZE:
            node_start[ni] = start
            node_count[ni] = count
            return ni
        ext = node_max[ni] - node_min[ni]
        axis = int(np.argmax(ext))
        half = count // 2
        part = np.argpartition(cent[idx, axis], half)
        order[start : start + count] = idx[part]
        left = build(start, half)
        right = build(start + half, count - half)
        node_left[ni] = left
        node_right[ni] = right
        return ni

    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 10000))
    try:
        build(0, m)
    finally:
        sys.setrecursionlimit(old_limit)

    prisms = PrismTables.from_scene(scene) if scene is not None else None
    return RayIndex(
        v0=np.ascontiguousarray(va[order]),
        v1=np.ascontiguousarray(vb[order]),
        v2=np.ascontiguousarray(vc[order]),
        tri_building=np.ascontiguousarray(mesh.tri_building[order]),
        node_min=np.array(node_min, dtype=np.float64),
        node_max=np.array(node_max, dtype=np.float64),
        node_left=np.array(node_left, dtype=np.int32),
        node_right=np.array(node_right, dtype=np.int32),
        node_start=np.array(node_start, dtype=np.int32),
        node_count=np.array(node_count, dtype=np.int32),
        building_ids=list(mesh.building_ids),
        prisms=prisms,
    )


@njit(cache=True, inline="always")
def _aabb_hit(ox, oy, oz, idx, idy, idz, bmin, bmax, tbest):
    t1 = (bmin[0] - ox) * idx
    t2 = (bmax[0] - ox) * idx
    tmin = min(t1, t2)
    tmax = max(t1, t2)
    t1 = (bmin[1] - oy) * idy
    t2 = (bmax[1] - oy) * idy
    tmin = max(tmin, min(t1, t2))
    tmax = min(tmax, max(t1, t2))
    t1 = (bmin[2] - oz) * idz
    t2 = (bmax[2] - oz) * idz
    tmin = max(tmin, min(t1, t2))
    tmax = min(tmax, max(t1, t2))
    return tmax >= max(tmin, 0.0) and tmin < tbest


@njit(cache=True, inline="always")
def _tri_hit(ox, oy, oz, dx, dy, dz, ax, ay, az, bx, by, bz, cx, cy, cz):
    """Moller-Trumbore; returns t or -1."""
    e1x = bx - ax
    e1y = by - ay
    e1z = bz - az
    e2x = cx - ax
    e2y = cy - ay
    e2z = cz - az
    hx = dy * e2z - dz * e2y
    hy = dz * e2x - dx * e2z
    hz = dx * e2y - dy * e2x
    a = e1x * hx + e1y * hy + e1z * hz
    if -_EPS_PARALLEL < a < _EPS_PARALLEL:
        return -1.0
    f = 1.0 / a
    sx = ox - ax
    sy = oy - ay
    sz = oz - az
    u = f * (sx * hx + sy * hy + sz * hz)
    if u < -1e-12 or u > 1.0 + 1e-12:
        return -1.0
    qx = sy * e1z - sz * e1y
    qy = sz * e1x - sx * e1z
    qz = sx * e1y - sy * e1x
    v = f * (dx * qx + dy * qy + dz * qz)
    if v < -1e-12 or u + v > 1.0 + 1e-12:
        return -1.0
    t = f * (e2x * qx + e2y * qy + e2z * qz)
    if t > _T_MIN:
        return t
    return -1.0


@njit(cache=True)
def _closest_hit(
    ox, oy, oz, dx, dy, dz,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, v1, v2,
):
    """Returns (t, triangle_index) of the nearest hit, or (inf, -1)."""
    idx = 1.0 / dx if dx != 0.0 else np.inf
    idy = 1.0 / dy if dy != 0.0 else np.inf
    idz = 1.0 / dz if dz != 0.0 else np.inf
    best_t = np.inf
    best_i = -1
    stack = np.empty(64, dtype=np.int32)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if not _aabb_hit(ox, oy, oz, idx, idy, idz, node_min[ni], node_max[ni], best_t):
            continue
        if node_count[ni] > 0:
            s = node_start[ni]
            for k in range(s, s + node_count[ni]):
                t = _tri_hit(
                    ox, oy, oz, dx, dy, dz,
                    v0[k, 0], v0[k, 1], v0[k, 2],
                    v1[k, 0], v1[k, 1], v1[k, 2],
                    v2[k, 0], v2[k, 1], v2[k, 2],
                )
                if 0.0 < t < best_t:
                    best_t = t
                    best_i = k
        else:
            stack[sp] = node_left[ni]
            sp += 1
            stack[sp] = node_right[ni]
            sp += 1
    return best_t, best_i


@njit(cache=True)
def _any_hit(
    ox, oy, oz, dx, dy, dz, tmax,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, v1, v2,
):
    idx = 1.0 / dx if dx != 0.0 else np.inf
    idy = 1.0 / dy if dy != 0.0 else np.inf
    idz = 1.0 / dz if dz != 0.0 else np.inf
    stack = np.empty(64, dtype=np.int32)
    sp = 0
    stack[sp] = 0
    sp += 1
    while sp > 0:
        sp -= 1
        ni = stack[sp]
        if not _aabb_hit(ox, oy, oz, idx, idy, idz, node_min[ni], node_max[ni], tmax):
            continue
        if node_count[ni] > 0:
            s = node_start[ni]
            for k in range(s, s + node_count[ni]):
                t = _tri_hit(
                    ox, oy, oz, dx, dy, dz,
                    v0[k, 0], v0[k, 1], v0[k, 2],
                    v1[k, 0], v1[k, 1], v1[k, 2],
                    v2[k, 0], v2[k, 1], v2[k, 2],
                )
                if 0.0 < t < tmax:
                    return True
        else:
            stack[sp] = node_left[ni]
            sp += 1
            stack[sp] = node_right[ni]
            sp += 1
    return False


@njit(cache=True, parallel=True)
def _render_mask_bvh(
    ox, oy, oz, rot,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, v1, v2, tri_building,
    cos_psi, sin_psi, cos_phi, sin_phi,
    out, building_label, other_label,
):
    H = out.shape[0]
    W = out.shape[1]
    for vrow in prange(H):
        cp = cos_psi[vrow]
        sps = sin_psi[vrow]
        for u in range(W):
            cx = cp * cos_phi[u]
            cy = cp * sin_phi[u]
            cz = sps
            dx = rot[0, 0] * cx + rot[0, 1] * cy + rot[0, 2] * cz
            dy = rot[1, 0] * cx + rot[1, 1] * cy + rot[1, 2] * cz
            dz = rot[2, 0] * cx + rot[2, 1] * cy + rot[2, 2] * cz
            t, ti = _closest_hit(
                ox, oy, oz, dx, dy, dz,
                node_min, node_max, node_left, node_right, node_start, node_count,
                v0, v1, v2,
            )
            if ti >= 0 and tri_building[ti] >= 0:
                out[vrow, u] = building_label
            else:
                out[vrow, u] = other_label


@njit(cache=True, parallel=True)
def _hit_buffers_bvh(
    ox, oy, oz, rot,
    node_min, node_max, node_left, node_right, node_start, node_count,
    v0, v1, v2,
    cos_psi, sin_psi, cos_phi, sin_phi,
    out_t, out_tri,
):
    H = out_t.shape[0]
    W = out_t.shape[1]
    for vrow in prange(H):
        cp = cos_psi[vrow]
        sps = sin_psi[vrow]
        for u in range(W):
            cx = cp * cos_phi[u]
            cy = cp * sin_phi[u]
            cz = sps
            dx = rot[0, 0] * cx + rot[0, 1] * cy + rot[0, 2] * cz
            dy = rot[1, 0] * cx + rot[1, 1] * cy + rot[1, 2] * cz
            dz = rot[2, 0] * cx + rot[2, 1] * cy + rot[2, 2] * cz
            t, ti = _closest_hit(
                ox, oy, oz, dx, dy, dz,
                node_min, node_max, node_left, node_right, node_start, node_count,
                v0, v1, v2,
            )
            out_t[vrow, u] = t
            out_tri[vrow, u] = ti


@njit(cache=True, inline="always")
def _point_in_ring(px, py, ex1, ey1, ex2, ey2, e0, e1):
    inside = False
    for e in range(e0, e1):
        x1 = ex1[e]
        y1 = ey1[e]
        x2 = ex2[e]
        y2 = ey2[e]
        if (y1 > py) != (y2 > py):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xint:
                inside = not inside
    return inside


@njit(cache=True)
def _terrain_z(x, y, x0, y0, cell, values):
    rows, cols = values.shape
    fx = (x - x0) / cell
    fy = (y - y0) / cell
    if fx < 0.0 or fy < 0.0 or fx > cols - 1 or fy > rows - 1:
        return np.nan
    j = min(int(fx), cols - 2)
    i = min(int(fy), rows - 2)
    tx = fx - j
    ty = fy - i
    return (
        values[i, j] * (1 - tx) * (1 - ty)
        + values[i, j + 1] * tx * (1 - ty)
        + values[i + 1, j] * (1 - tx) * ty
        + values[i + 1, j + 1] * tx * ty
    )


@njit(cache=True)
def _camera_feasible(
    x, y, z,
    edge_x1, edge_y1, edge_x2, edge_y2, bld_off, bld_base, bld_top, bld_bbox,
    t_x0, t_y0, t_cell, t_values,
):
    gz = _terrain_z(x, y, t_x0, t_y0, t_cell, t_values)
    if np.isnan(gz) or z < gz - 1e-9:
        return False
    nb = len(bld_base)
    for b in range(nb):
        if x < bld_bbox[b, 0] or x > bld_bbox[b, 2] or y < bld_bbox[b, 1] or y > bld_bbox[b, 3]:
            continue
        if bld_base[b] <= z <= bld_top[b] and _point_in_ring(
            x, y, edge_x1, edge_y1, edge_x2, edge_y2, bld_off[b], bld_off[b + 1]
        ):
            return False
    return True


def camera_feasible(prisms: PrismTables, x: float, y: float, z: float) -> bool:
    """True when (x, y, z) is above the terrain and outside every building."""
    return bool(
        _camera_feasible(
            x, y, z,
            prisms.edge_x1, prisms.edge_y1, prisms.edge_x2, prisms.edge_y2,
            prisms.bld_edge_off, prisms.bld_base, prisms.bld_top, prisms.bld_bbox,
            prisms.terrain_x0, prisms.terrain_y0, prisms.terrain_cell, prisms.terrain_values,
        )
    )


def closest_hit(index: RayIndex, origin, direction):
    """(t, triangle_index) of the nearest surface along the ray, or (inf, -1)."""
    t, ti = _closest_hit(
        origin[0], origin[1], origin[2], direction[0], direction[1], direction[2],
        index.node_min, index.node_max, index.node_left, index.node_right,
        index.node_start, index.node_count, index.v0, index.v1, index.v2,
    )
    return float(t), int(ti)


def any_hit(index: RayIndex, origin, direction, tmax=np.inf) -> bool:
    return bool(
        _any_hit(
            origin[0], origin[1], origin[2], direction[0], direction[1], direction[2], tmax,
            index.node_min, index.node_max, index.node_left, index.node_right,
            index.node_start, index.node_count, index.v0, index.v1, index.v2,
        )
    )


def set_threads(n: int) -> None:
    if n > 0:
        numba.set_num_threads(n)
