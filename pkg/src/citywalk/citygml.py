"""CityGML LOD1 reader.

Reads the subset of CityGML that street-level city models actually use:

* ``Building`` features, matched by local tag name in any namespace version,
  carrying either an ``lod1Solid`` or a footprint polygon plus
  ``measuredHeight``
* ``gen:stringAttribute`` / ``gen:doubleAttribute`` / ``gen:intAttribute``
  name-value pairs, all stored as strings
* ``ReliefFeature`` elevation points, resampled onto a regular grid
* ``WaterBody`` features with a flood scenario id, level and extent polygon

Coordinates are taken as local metric x y z unless an ``srsName`` in the
document names a geodetic CRS (4326, 6697 or CRS84), in which case positions
are read as lat lon [height] and converted to the local east/north/up frame.
"""
from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from typing import Optional

import numpy as np

from .citymodel import Building, CityScene, TerrainGrid, WaterBody, terrain_elevation
from .errors import InvalidPolygon, MalformedXml, OutOfBounds, UnsupportedLod
from .geom import GeodeticPoint, enu_from_geodetic
from .polygon import ensure_ccw, is_simple_polygon, polygon_centroid

_GEODETIC_MARKERS = ("4326", "6697", "CRS84")
DEFAULT_TERRAIN_CELL = 2.0


def _local(tag: str) -> str:
    return tag.rsplit("}", 1)[-1]


def _iter_local(root: ET.Element, name: str):
    for el in root.iter():
        if _local(el.tag) == name:
            yield el


def _find_local(el: ET.Element, name: str) -> Optional[ET.Element]:
    for child in el.iter():
        if _local(child.tag) == name:
            return child
    return None


def _gml_id(el: ET.Element) -> Optional[str]:
    for k, v in el.attrib.items():
        if _local(k) == "id":
            return v
    return None


def _doc_is_geodetic(root: ET.Element) -> bool:
    for el in root.iter():
        srs = el.get("srsName")
        if srs:
            return any(m in srs for m in _GEODETIC_MARKERS)
    return False


def _parse_poslist(el: ET.Element, dim: int) -> np.ndarray:
    vals = [float(v) for v in (el.text or "").split()]
    if len(vals) % dim != 0:
        raise MalformedXml(f"posList length {len(vals)} not divisible by {dim}")
    return np.array(vals, dtype=np.float64).reshape(-1, dim)


def _ring_points(poly: ET.Element) -> np.ndarray:
    """Exterior ring coordinates of a gml Polygon, one row per vertex."""
    ext = _find_local(poly, "exterior") or poly
    pos_list = _find_local(ext, "posList")
    if pos_list is not None:
        dim = int(pos_list.get("srsDimension", "3"))
        pts = _parse_poslist(pos_list, dim)
    else:
        rows = []
        for pos in _iter_local(ext, "pos"):
            rows.append([float(v) for v in (pos.text or "").split()])
        if not rows:
            raise MalformedXml("polygon ring without posList or pos elements")
        pts = np.array(rows, dtype=np.float64)
    if pts.shape[1] == 2:
        pts = np.hstack([pts, np.zeros((len(pts), 1))])
    # drop the closing repeat of the first vertex
    if len(pts) > 1 and np.allclose(pts[0], pts[-1]):
        pts = pts[:-1]
    return pts


class _Frame:
    """Converts raw document coordinates to the scene's local frame."""

    def __init__(self, geodetic: bool, origin: Optional[GeodeticPoint]):
        self.geodetic = geodetic
        self.origin = origin

    def ensure_origin(self, first_point: np.ndarray) -> None:
        if self.origin is not None:
            return
        if self.geodetic:
            self.origin = GeodeticPoint(float(first_point[0]), float(first_point[1]), 0.0)
        else:
            self.origin = GeodeticPoint(0.0, 0.0, 0.0)

    def to_local(self, pts: np.ndarray) -> np.ndarray:
        self.ensure_origin(pts[0])
        if not self.geodetic:
            return pts
        out = np.empty_like(pts)
        for i, (lat, lon, h) in enumerate(pts):
            v = enu_from_geodetic(self.origin, GeodeticPoint(lat, lon, h))
            out[i] = (v.x, v.y, v.z)
        return out


def _footprint_from_solid(solid: ET.Element, frame: _Frame, bid: str):
    polys = []
    for poly in _iter_local(solid, "Polygon"):
        polys.append(frame.to_local(_ring_points(poly)))
    if not polys:
        raise UnsupportedLod(bid, "lod1Solid has no polygons")
    allz = np.concatenate([p[:, 2] for p in polys])
    zmin = float(np.min(allz))
    zmax = float(np.max(allz))
    if zmax - zmin <= 0:
        raise UnsupportedLod(bid, "solid has zero height")
    tol = 1e-6 * max(1.0, abs(zmin), abs(zmax))
    bottom = None
    top = None
    for p in polys:
        if np.all(np.abs(p[:, 2] - zmin) <= tol):
            bottom = p
        elif np.all(np.abs(p[:, 2] - zmax) <= tol):
            top = p
    face = bottom if bottom is not None else top
    if face is None:
        raise UnsupportedLod(bid, "solid has no horizontal face")
    return face[:, :2].copy(), zmin, zmax - zmin


def _building_footprint(bel: ET.Element, frame: _Frame, bid: str):
    """Returns (footprint_xy, base_or_None, height)."""
    solid = _find_local(bel, "lod1Solid")
    if solid is not None:
        fp, base, height = _footprint_from_solid(solid, frame, bid)
        return fp, base, height

    height = None
    mh = _find_local(bel, "measuredHeight")
    if mh is not None and mh.text:
        height = float(mh.text)
    poly = _find_local(bel, "Polygon")
    if poly is None:
        raise UnsupportedLod(bid, "no lod1Solid and no footprint polygon")
    if height is None:
        raise UnsupportedLod(bid, "footprint without measuredHeight")
    if height <= 0:
        raise UnsupportedLod(bid, f"non-positive measuredHeight {height}")
    pts = frame.to_local(_ring_points(poly))
    return pts[:, :2].copy(), None, height


def _building_attributes(bel: ET.Element) -> dict[str, str]:
    attrs: dict[str, str] = {}
    for el in bel.iter():
        if _local(el.tag) in ("stringAttribute", "doubleAttribute", "intAttribute"):
            name = el.get("name")
            val = _find_local(el, "value")
            if name and val is not None and val.text is not None:
                attrs[name] = val.text.strip()
    return attrs


def _terrain_from_points(pts: np.ndarray, cell: float, cover_bbox) -> TerrainGrid:
    from scipy.interpolate import griddata

    x0, y0, x1, y1 = cover_bbox
    x0 = min(x0, float(np.min(pts[:, 0]))) - 2 * cell
    y0 = min(y0, float(np.min(pts[:, 1]))) - 2 * cell
    x1 = max(x1, float(np.max(pts[:, 0]))) + 2 * cell
    y1 = max(y1, float(np.max(pts[:, 1]))) + 2 * cell
    cols = max(2, int(math.ceil((x1 - x0) / cell)) + 1)
    rows = max(2, int(math.ceil((y1 - y0) / cell)) + 1)
    xs = x0 + np.arange(cols) * cell
    ys = y0 + np.arange(rows) * cell
    gx, gy = np.meshgrid(xs, ys)
    if len(pts) >= 3:
        vals = griddata(pts[:, :2], pts[:, 2], (gx, gy), method="linear")
        near = griddata(pts[:, :2], pts[:, 2], (gx, gy), method="nearest")
        vals = np.where(np.isnan(vals), near, vals)
    else:
        vals = np.full((rows, cols), float(np.mean(pts[:, 2])))
    return TerrainGrid(origin_x=x0, origin_y=y0, cell=cell, values=vals.astype(np.float64))


def _flat_terrain(bbox, elevation: float = 0.0, margin: float = 20.0) -> TerrainGrid:
    x0, y0, x1, y1 = bbox
    x0 -= margin
    y0 -= margin
    x1 += margin
    y1 += margin
    side = max(x1 - x0, y1 - y0)
    values = np.full((2, 2), elevation, dtype=np.float64)
    return TerrainGrid(origin_x=x0, origin_y=y0, cell=side, values=values)


def _water_bodies(root: ET.Element, frame: _Frame) -> list[WaterBody]:
    bodies = []
    for wel in _iter_local(root, "WaterBody"):
        wid = _gml_id(wel)
        if wid is None:
            nm = _find_local(wel, "name")
            wid = nm.text.strip() if nm is not None and nm.text else f"water{len(bodies)}"
        poly = _find_local(wel, "Polygon")
        if poly is None:
            continue
        pts = frame.to_local(_ring_points(poly))
        level = None
        for el in wel.iter():
            if _local(el.tag) == "doubleAttribute" and el.get("name") == "water_level":
                val = _find_local(el, "value")
                if val is not None and val.text:
                    level = float(val.text)
        if level is None:
            level = float(np.mean(pts[:, 2]))
        bodies.append(WaterBody(scenario_id=wid, level=level, extent=ensure_ccw(pts[:, :2].copy())))
    return bodies


def parse_citygml(
    text: str,
    origin: Optional[GeodeticPoint] = None,
    terrain_cell: float = DEFAULT_TERRAIN_CELL,
) -> CityScene:
    """Parse a CityGML document into a CityScene.

    Raises MalformedXml for broken documents, UnsupportedLod for buildings
    without usable LOD1 geometry, InvalidPolygon for non-simple footprints.
    """
    try:
        root = ET.fromstring(text)
    except ET.ParseError as e:
        raise MalformedXml(str(e)) from e
    if _local(root.tag) != "CityModel":
        raise MalformedXml(f"root element is {_local(root.tag)!r}, expected CityModel")

    frame = _Frame(_doc_is_geodetic(root), origin)

    raw_buildings = []
    anon = 0
    for bel in _iter_local(root, "Building"):
        bid = _gml_id(bel)
        if bid is None:
            bid = f"building{anon}"
            anon += 1
        fp, base, height = _building_footprint(bel, frame, bid)
        fp = ensure_ccw(fp)
        if len(fp) < 3 or not is_simple_polygon(fp):
            raise InvalidPolygon(bid, "footprint is not a simple polygon")
        raw_buildings.append((bid, fp, base, height, _building_attributes(bel)))

    terrain_pts = []
    for rel in _iter_local(root, "ReliefFeature"):
        for pl in _iter_local(rel, "posList"):
            dim = int(pl.get("srsDimension", "3"))
            terrain_pts.append(frame.to_local(_parse_poslist(pl, dim)))
        for pos in _iter_local(rel, "pos"):
            row = np.array([[float(v) for v in (pos.text or "").split()]])
            terrain_pts.append(frame.to_local(row))

    if raw_buildings:
        allxy = np.vstack([fp for _, fp, _, _, _ in raw_buildings])
        bbox = (
            float(np.min(allxy[:, 0])),
            float(np.min(allxy[:, 1])),
            float(np.max(allxy[:, 0])),
            float(np.max(allxy[:, 1])),
        )
    else:
        bbox = (0.0, 0.0, 0.0, 0.0)

    if terrain_pts:
        terrain = _terrain_from_points(np.vstack(terrain_pts), terrain_cell, bbox)
    else:
        terrain = _flat_terrain(bbox)

    buildings = []
    for bid, fp, base, height, attrs in raw_buildings:
        if base is None:
            cx, cy = polygon_centroid(fp)
            try:
                base = terrain_elevation(terrain, cx, cy)
            except OutOfBounds:
                base = 0.0
        buildings.append(
            Building(id=bid, footprint=fp, base_elevation=base, height=height, attributes=attrs)
        )

    if frame.origin is None:
        frame.origin = GeodeticPoint(0.0, 0.0, 0.0)

    return CityScene(
        origin=frame.origin,
        buildings=buildings,
        terrain=terrain,
        water=_water_bodies(root, frame),
    )
