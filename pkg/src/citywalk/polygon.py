"""2D polygon helpers: orientation, simplicity check, ear clipping, containment."""
from __future__ import annotations

import numpy as np

from .errors import TriangulationFailure


def signed_area(pts: np.ndarray) -> float:
    x = pts[:, 0]
    y = pts[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def ensure_ccw(pts: np.ndarray) -> np.ndarray:
    if signed_area(pts) < 0.0:
        return pts[::-1].copy()
    return pts


def polygon_centroid(pts: np.ndarray) -> tuple[float, float]:
    """Area-weighted centroid; falls back to vertex mean for zero area."""
    x = pts[:, 0]
    y = pts[:, 1]
    cr = x * np.roll(y, -1) - np.roll(x, -1) * y
    a = 0.5 * float(np.sum(cr))
    if abs(a) < 1e-12:
        return float(np.mean(x)), float(np.mean(y))
    cx = float(np.sum((x + np.roll(x, -1)) * cr)) / (6.0 * a)
    cy = float(np.sum((y + np.roll(y, -1)) * cr)) / (6.0 * a)
    return cx, cy


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _on_segment(ax, ay, bx, by, px, py) -> bool:
    return min(ax, bx) <= px <= max(ax, bx) and min(ay, by) <= py <= max(ay, by)


def _segments_intersect(p1, p2, p3, p4) -> bool:
    d1 = _orient(*p3, *p4, *p1)
    d2 = _orient(*p3, *p4, *p2)
    d3 = _orient(*p1, *p2, *p3)
    d4 = _orient(*p1, *p2, *p4)
    if ((d1 > 0 and d2 < 0) or (d1 < 0 and d2 > 0)) and ((d3 > 0 and d4 < 0) or (d3 < 0 and d4 > 0)):
        return True
    if d1 == 0 and _on_segment(*p3, *p4, *p1):
        return True
    if d2 == 0 and _on_segment(*p3, *p4, *p2):
        return True
    if d3 == 0 and _on_segment(*p1, *p2, *p3):
        return True
    if d4 == 0 and _on_segment(*p1, *p2, *p4):
        return True
    return False


def is_simple_polygon(pts: np.ndarray) -> bool:
    """True when no two non-adjacent edges touch and no edge is degenerate."""
    n = len(pts)
    if n < 3:
        return False
    edges = [(tuple(pts[i]), tuple(pts[(i + 1) % n])) for i in range(n)]
    for i in range(n):
        a, b = edges[i]
        if a == b:
            return False
        for j in range(i + 1, n):
            # skip the shared-vertex adjacency (including the wrap-around pair)
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            c, d = edges[j]
            if _segments_intersect(a, b, c, d):
                return False
    return True


def point_in_polygon(px: float, py: float, pts: np.ndarray) -> bool:
    """Even-odd containment; points on the boundary count as inside."""
    n = len(pts)
    inside = False
    for i in range(n):
        x1, y1 = pts[i]
        x2, y2 = pts[(i + 1) % n]
        if _orient(x1, y1, x2, y2, px, py) == 0 and _on_segment(x1, y1, x2, y2, px, py):
            return True
        if (y1 > py) != (y2 > py):
            xint = x1 + (py - y1) * (x2 - x1) / (y2 - y1)
            if px < xint:
                inside = not inside
    return inside


def ear_clip(pts: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate a simple CCW polygon into index triples.

    Collinear vertices are dropped without emitting a degenerate triangle.
    """
    n = len(pts)
    if n < 3:
        raise TriangulationFailure(f"polygon needs at least 3 vertices, got {n}")
    idx = list(range(n))
    tris: list[tuple[int, int, int]] = []
    scale = float(np.max(np.abs(pts))) + 1.0
    flat_eps = 1e-12 * scale * scale
    guard = 0
    while len(idx) > 3:
        guard += 1
        if guard > 2 * n * n:
            raise TriangulationFailure("no ear found; polygon may not be simple")
        m = len(idx)
        clipped = False
        for k in range(m):
            ia, ib, ic = idx[(k - 1) % m], idx[k], idx[(k + 1) % m]
            ax, ay = pts[ia]
            bx, by = pts[ib]
            cx, cy = pts[ic]
            cr = _orient(ax, ay, bx, by, cx, cy)
            if cr < -flat_eps:
                continue  # reflex corner
            contains_other = False
            for io in idx:
                if io in (ia, ib, ic):
                    continue
                px, py = pts[io]
                if (
                    _orient(ax, ay, bx, by, px, py) >= 0
                    and _orient(bx, by, cx, cy, px, py) >= 0
                    and _orient(cx, cy, ax, ay, px, py) >= 0
                ):
                    contains_other = True
                    break
            if contains_other:
                continue
            if cr > flat_eps:
                tris.append((ia, ib, ic))
            idx.pop(k)
            clipped = True
            break
        if not clipped:
            raise TriangulationFailure("no ear found; polygon may not be simple")
    ia, ib, ic = idx
    ax, ay = pts[ia]
    bx, by = pts[ib]
    cx, cy = pts[ic]
    if _orient(ax, ay, bx, by, cx, cy) > flat_eps:
        tris.append((ia, ib, ic))
    if not tris:
        raise TriangulationFailure("polygon has no area")
    return tris
