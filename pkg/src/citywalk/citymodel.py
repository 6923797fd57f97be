"""Scene model: extruded LOD1 buildings, gridded terrain, flood water bodies.

A scene lives in a local east/north/up frame anchored at a geodetic origin.
Buildings are vertical prisms: a simple counter-clockwise footprint polygon
extruded from base_elevation to base_elevation + height, open at the bottom.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import DimensionMismatch, OutOfBounds, TriangulationFailure
from .geom import GeodeticPoint
from .polygon import ear_clip, ensure_ccw, polygon_centroid, signed_area

SCENE_FORMAT = "cityscene/1"


@dataclass
class Building:
    id: str
    footprint: np.ndarray  # (n, 2) float64, CCW
    base_elevation: float
    height: float
    attributes: dict[str, str] = field(default_factory=dict)

    def centroid(self) -> tuple[float, float]:
        return polygon_centroid(self.footprint)


@dataclass
class TerrainGrid:
    """Regular elevation grid; node (i, j) sits at (origin + j*cell, origin + i*cell)."""

    origin_x: float
    origin_y: float
    cell: float
    values: np.ndarray  # (rows, cols) float64

    def bounds(self) -> tuple[float, float, float, float]:
        rows, cols = self.values.shape
        return (
            self.origin_x,
            self.origin_y,
            self.origin_x + (cols - 1) * self.cell,
            self.origin_y + (rows - 1) * self.cell,
        )


@dataclass
class WaterBody:
    scenario_id: str
    level: float  # water surface elevation, scene z
    extent: np.ndarray  # (n, 2) float64 polygon


@dataclass
class CityScene:
    origin: GeodeticPoint
    buildings: list[Building]
    terrain: TerrainGrid
    water: list[WaterBody] = field(default_factory=list)

    def building(self, building_id: str) -> Optional[Building]:
        for b in self.buildings:
            if b.id == building_id:
                return b
        return None

    def scenario(self, scenario_id: str) -> Optional[WaterBody]:
        for w in self.water:
            if w.scenario_id == scenario_id:
                return w
        return None


def terrain_elevation(terrain: TerrainGrid, x: float, y: float) -> float:
    """Bilinear elevation at (x, y); OutOfBounds beyond the grid edge."""
    rows, cols = terrain.values.shape
    fx = (x - terrain.origin_x) / terrain.cell
    fy = (y - terrain.origin_y) / terrain.cell
    if fx < 0.0 or fy < 0.0 or fx > cols - 1 or fy > rows - 1:
        raise OutOfBounds(f"({x}, {y}) outside terrain grid")
    j = min(int(fx), cols - 2)
    i = min(int(fy), rows - 2)
    tx = fx - j
    ty = fy - i
    v = terrain.values
    return float(
        v[i, j] * (1 - tx) * (1 - ty)
        + v[i, j + 1] * tx * (1 - ty)
        + v[i + 1, j] * (1 - tx) * ty
        + v[i + 1, j + 1] * tx * ty
    )


@dataclass
class TriangleMesh:
    vertices: np.ndarray  # (n, 3) float64
    triangles: np.ndarray  # (m, 3) int32
    tri_building: np.ndarray  # (m,) int32 index into building_ids, -1 for terrain
    building_ids: list[str]


def scene_to_mesh(scene: CityScene) -> TriangleMesh:
    """Triangulate the scene: building walls and roofs plus the terrain surface.

    Walls wind outward, roofs upward.  Prism bottoms are left open; together
    with the terrain underneath every prism is closed from above ground.
    """
    verts: list[np.ndarray] = []
    tris: list[tuple[int, int, int]] = []
    labels: list[int] = []
    building_ids = [b.id for b in scene.buildings]

    for bi, b in enumerate(scene.buildings):
        fp = ensure_ccw(np.asarray(b.footprint, dtype=np.float64))
        n = len(fp)
        z0 = b.base_elevation
        z1 = b.base_elevation + b.height
        base = len(verts)
        for x, y in fp:
            verts.append(np.array([x, y, z0]))
        for x, y in fp:
            verts.append(np.array([x, y, z1]))
        for i in range(n):
            j = (i + 1) % n
            # bottom_i, bottom_j, top_j, top_i seen from outside a CCW ring
            tris.append((base + i, base + j, base + n + j))
            tris.append((base + i, base + n + j, base + n + i))
            labels.extend((bi, bi))
        try:
            cap = ear_clip(fp)
        except TriangulationFailure as e:
            raise TriangulationFailure(f"building {b.id!r}: {e}") from e
        for ia, ib, ic in cap:
            tris.append((base + n + ia, base + n + ib, base + n + ic))
            labels.append(bi)

    t = scene.terrain
    rows, cols = t.values.shape
    tbase = len(verts)
    for i in range(rows):
        for j in range(cols):
            verts.append(
                np.array([t.origin_x + j * t.cell, t.origin_y + i * t.cell, t.values[i, j]])
            )
    for i in range(rows - 1):
        for j in range(cols - 1):
            a = tbase + i * cols + j
            b_ = a + 1
            c = a + cols + 1
            d = a + cols
            tris.append((a, b_, c))
            tris.append((a, c, d))
            labels.extend((-1, -1))

    return TriangleMesh(
        vertices=np.array(verts, dtype=np.float64),
        triangles=np.array(tris, dtype=np.int32),
        tri_building=np.array(labels, dtype=np.int32),
        building_ids=building_ids,
    )


def _scene_dict(scene: CityScene) -> dict:
    return {
        "format": SCENE_FORMAT,
        "origin": {
            "lat_deg": scene.origin.lat_deg,
            "lon_deg": scene.origin.lon_deg,
            "height_m": scene.origin.height_m,
        },
        "terrain": {
            "origin_x": scene.terrain.origin_x,
            "origin_y": scene.terrain.origin_y,
            "cell": scene.terrain.cell,
            "values": [[float(v) for v in row] for row in scene.terrain.values],
        },
        "buildings": [
            {
                "id": b.id,
                "footprint": [[float(x), float(y)] for x, y in b.footprint],
                "base_elevation": b.base_elevation,
                "height": b.height,
                "attributes": dict(sorted(b.attributes.items())),
            }
            for b in scene.buildings
        ],
        "water": [
            {
                "scenario_id": w.scenario_id,
                "level": w.level,
                "extent": [[float(x), float(y)] for x, y in w.extent],
            }
            for w in scene.water
        ],
    }


def scene_to_json(scene: CityScene) -> str:
    """Canonical serialization: sorted keys, no whitespace, shortest float repr."""
    return json.dumps(_scene_dict(scene), sort_keys=True, separators=(",", ":"))


def scene_from_json(text: str) -> CityScene:
    d = json.loads(text)
    fmt = d.get("format")
    if fmt != SCENE_FORMAT:
        raise ValueError(f"unsupported scene format: {fmt!r}")
    o = d["origin"]
    origin = GeodeticPoint(o["lat_deg"], o["lon_deg"], o["height_m"])
    t = d["terrain"]
    terrain = TerrainGrid(
        origin_x=t["origin_x"],
        origin_y=t["origin_y"],
        cell=t["cell"],
        values=np.array(t["values"], dtype=np.float64),
    )
    buildings = [
        Building(
            id=b["id"],
            footprint=np.array(b["footprint"], dtype=np.float64),
            base_elevation=b["base_elevation"],
            height=b["height"],
            attributes=dict(b["attributes"]),
        )
        for b in d["buildings"]
    ]
    water = [
        WaterBody(
            scenario_id=w["scenario_id"],
            level=w["level"],
            extent=np.array(w["extent"], dtype=np.float64),
        )
        for w in d["water"]
    ]
    return CityScene(origin=origin, buildings=buildings, terrain=terrain, water=water)


def validate_scene(scene: CityScene) -> None:
    """Cheap invariant checks used by loaders and generators."""
    if scene.terrain.cell <= 0:
        raise ValueError("terrain cell size must be positive")
    if not np.all(np.isfinite(scene.terrain.values)):
        raise ValueError("terrain contains non-finite values")
    x0, y0, x1, y1 = scene.terrain.bounds()
    for b in scene.buildings:
        if b.height <= 0:
            raise ValueError(f"building {b.id!r} has non-positive height")
        if abs(signed_area(b.footprint)) < 1e-9:
            raise ValueError(f"building {b.id!r} footprint has no area")
        fx0, fy0 = np.min(b.footprint, axis=0)
        fx1, fy1 = np.max(b.footprint, axis=0)
        if fx0 < x0 - 1e-6 or fy0 < y0 - 1e-6 or fx1 > x1 + 1e-6 or fy1 > y1 + 1e-6:
            raise ValueError(f"building {b.id!r} footprint outside terrain bounds")


def masks_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimensionMismatch(f"mask shapes differ: {a.shape} vs {b.shape}")
