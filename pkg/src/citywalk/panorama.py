"""Equirectangular panorama masks and the building-mask renderer.

Pixel (u, v) of a W x H panorama maps to camera-frame azimuth and latitude

    phi = 2*pi*(u + 0.5)/W - pi        (0 straight ahead, +pi/2 to the left)
    psi = pi/2 - pi*(v + 0.5)/H        (+pi/2 straight up)

so the top-left pixel looks up-and-behind and column W/2 looks forward.
Masks label every pixel NON_BUILDING, OCCLUDED or BUILDING.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from .citymodel import TriangleMesh
from .errors import CameraInsideGeometry, DimensionMismatch, EmptyInput
from .geom import CameraPose, Vec3
from .raycast import RayIndex, _render_mask_bvh, camera_feasible

NON_BUILDING = 0
OCCLUDED = 128
BUILDING = 255

_VALID_LABELS = frozenset((NON_BUILDING, OCCLUDED, BUILDING))


@dataclass
class PanoMask:
    labels: np.ndarray  # (H, W) uint8

    def __post_init__(self):
        if self.labels.ndim != 2 or self.labels.dtype != np.uint8:
            raise ValueError("mask must be a 2D uint8 array")
        if self.labels.shape[1] != 2 * self.labels.shape[0]:
            raise ValueError(f"panorama must be 2:1, got {self.labels.shape}")

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]


def pixel_ray(u: float, v: float, width: int, height: int) -> Vec3:
    """Camera-frame unit direction through pixel center (u, v)."""
    phi = 2.0 * math.pi * (u + 0.5) / width - math.pi
    psi = 0.5 * math.pi - math.pi * (v + 0.5) / height
    cp = math.cos(psi)
    return Vec3(cp * math.cos(phi), cp * math.sin(phi), math.sin(psi))


_angle_cache: dict[tuple[int, int], tuple[np.ndarray, ...]] = {}


def angle_tables(width: int, height: int):
    """(cos_psi, sin_psi, cos_phi, sin_phi) for pixel centers, cached."""
    key = (width, height)
    got = _angle_cache.get(key)
    if got is None:
        psi = 0.5 * np.pi - np.pi * (np.arange(height) + 0.5) / height
        phi = 2.0 * np.pi * (np.arange(width) + 0.5) / width - np.pi
        got = (np.cos(psi), np.sin(psi), np.cos(phi), np.sin(phi))
        _angle_cache[key] = got
    return got


def render_building_mask(
    mesh: TriangleMesh, index: RayIndex, pose: CameraPose, width: int, height: int
) -> PanoMask:
    """Ray-cast one building mask: BUILDING where the nearest hit is a wall or
    roof triangle, NON_BUILDING for terrain and sky."""
    if width != 2 * height:
        raise ValueError(f"panorama must be 2:1, got {width}x{height}")
    p = pose.position
    if index.prisms is not None and not camera_feasible(index.prisms, p.x, p.y, p.z):
        raise CameraInsideGeometry(f"camera at ({p.x:.3f}, {p.y:.3f}, {p.z:.3f})")
    cos_psi, sin_psi, cos_phi, sin_phi = angle_tables(width, height)
    out = np.empty((height, width), dtype=np.uint8)
    _render_mask_bvh(
        p.x, p.y, p.z, pose.orientation.to_matrix(),
        index.node_min, index.node_max, index.node_left, index.node_right,
        index.node_start, index.node_count,
        index.v0, index.v1, index.v2, index.tri_building,
        cos_psi, sin_psi, cos_phi, sin_phi,
        out, np.uint8(BUILDING), np.uint8(NON_BUILDING),
    )
    return PanoMask(out)


def discrepancy_count(a: PanoMask, b: PanoMask) -> int:
    """Pixels where the two masks disagree; OCCLUDED pixels in either mask are skipped."""
    if a.labels.shape != b.labels.shape:
        raise DimensionMismatch(f"{a.labels.shape} vs {b.labels.shape}")
    skip = (a.labels == OCCLUDED) | (b.labels == OCCLUDED)
    return int(np.count_nonzero((a.labels != b.labels) & ~skip))


def misalignment_rate(model_masks: list[PanoMask], ref_masks: list[PanoMask]) -> float:
    """Discrepant fraction of comparable pixels, pooled over all mask pairs."""
    if not model_masks or len(model_masks) != len(ref_masks):
        raise EmptyInput(f"{len(model_masks)} model masks vs {len(ref_masks)} reference masks")
    disc = 0
    comparable = 0
    for m, r in zip(model_masks, ref_masks):
        if m.labels.shape != r.labels.shape:
            raise DimensionMismatch(f"{m.labels.shape} vs {r.labels.shape}")
        skip = (m.labels == OCCLUDED) | (r.labels == OCCLUDED)
        disc += int(np.count_nonzero((m.labels != r.labels) & ~skip))
        comparable += int(np.count_nonzero(~skip))
    if comparable == 0:
        raise EmptyInput("no comparable pixels")
    return disc / comparable


def pgm_bytes(grid: np.ndarray) -> bytes:
    """Binary P5 image, maxval 255."""
    if grid.ndim != 2 or grid.dtype != np.uint8:
        raise ValueError("PGM payload must be a 2D uint8 array")
    h, w = grid.shape
    return f"P5\n{w} {h}\n255\n".encode("ascii") + grid.tobytes()


def write_pgm(path: str, grid: np.ndarray) -> None:
    with open(path, "wb") as f:
        f.write(pgm_bytes(grid))


def read_pgm(path: str) -> np.ndarray:
    with open(path, "rb") as f:
        data = f.read()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM file")
    fields: list[bytes] = []
    pos = 2
    while len(fields) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos] != 0x0A:
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    w, h, maxval = (int(x) for x in fields)
    if maxval != 255:
        raise ValueError(f"{path}: unsupported maxval {maxval}")
    grid = np.frombuffer(data[pos : pos + w * h], dtype=np.uint8)
    if len(grid) != w * h:
        raise ValueError(f"{path}: truncated pixel data")
    return grid.reshape(h, w).copy()


def write_mask(path: str, mask: PanoMask) -> None:
    if path.endswith(".png"):
        from PIL import Image

        Image.fromarray(mask.labels, mode="L").save(path)
    else:
        write_pgm(path, mask.labels)


def read_mask(path: str) -> PanoMask:
    if path.endswith(".png"):
        from PIL import Image

        grid = np.asarray(Image.open(path).convert("L"), dtype=np.uint8)
    else:
        grid = read_pgm(path)
    bad = set(np.unique(grid)) - _VALID_LABELS
    if bad:
        raise ValueError(f"{path}: unexpected label values {sorted(bad)}")
    return PanoMask(grid)


def mask_path(root: str, street_id: str, frame_index: int, ext: str = "pgm") -> str:
    return os.path.join(root, street_id, f"{frame_index}.{ext}")


def save_mask_set(root: str, street_id: str, masks: dict[int, PanoMask], ext: str = "pgm") -> None:
    os.makedirs(os.path.join(root, street_id), exist_ok=True)
    for frame, mask in masks.items():
        write_mask(mask_path(root, street_id, frame, ext), mask)


def load_mask_set(root: str, street_id: str, ext: str = "pgm") -> dict[int, PanoMask]:
    d = os.path.join(root, street_id)
    out: dict[int, PanoMask] = {}
    for name in sorted(os.listdir(d)):
        stem, _, e = name.rpartition(".")
        if e == ext:
            out[int(stem)] = read_mask(os.path.join(d, name))
    return out
