"""Column renderer for upright cameras over prism scenes with level terrain.

For a camera whose orientation is a pure yaw, every pixel column of an
equirectangular panorama shares one horizontal ray.  Along that ray each
building prism contributes at most three contiguous row intervals of BUILDING
pixels (near wall, roof crossing, far wall seen from underneath), whose row
bounds follow from comparing r * tan(psi_v) against base and roof heights.
When the terrain is a single level at or below every prism base, the ground
can never occlude a prism surface, so the building mask of a whole column is
just the union of those intervals.  Rendering and mask comparison then cost a
few dozen operations per column instead of per pixel, which is what makes the
registration benchmark tractable: the optimizer evaluates millions of frame
renders.

Masks produced here match the BVH renderer pixel for pixel up to floating
point ties on interval boundaries; the test suite checks the equivalence.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit, prange

from .geom import CameraPose, Quaternion
from .panorama import BUILDING, NON_BUILDING, OCCLUDED, PanoMask
from .raycast import PrismTables, _camera_feasible

_UPRIGHT_TOL = 1e-9


def is_upright(q: Quaternion, tol: float = _UPRIGHT_TOL) -> bool:
    """True when the rotation is a pure yaw (keeps +z pointing up)."""
    return abs(q.x) <= tol and abs(q.y) <= tol


def yaw_of(q: Quaternion) -> float:
    return 2.0 * math.atan2(q.z, q.w)


def fast_path_ok(prisms: PrismTables) -> bool:
    """Level terrain with no prism base below it."""
    if math.isnan(prisms.flat_elevation):
        return False
    if len(prisms.bld_base) and float(np.min(prisms.bld_base)) < prisms.flat_elevation - 1e-9:
        return False
    return True


_tan_cache: dict[int, np.ndarray] = {}


def tan_table(height: int) -> np.ndarray:
    """tan(psi_v) for pixel-center latitudes; strictly decreasing in v."""
    got = _tan_cache.get(height)
    if got is None:
        psi = 0.5 * np.pi - np.pi * (np.arange(height) + 0.5) / height
        got = np.tan(psi)
        _tan_cache[height] = got
    return got


@njit(cache=True, inline="always")
def _first_v(mv, H, r, T, incl):
    """First row v with r*mv[v] <= T (incl) or < T (strict); r*mv decreases in v."""
    lo = 0
    hi = H
    while lo < hi:
        mid = (lo + hi) >> 1
        p = r * mv[mid]
        if (p <= T) if incl else (p < T):
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, inline="always")
def _pair_intervals(mv, H, z0, r_in, r_out, base, top, st, en, n):
    """Append row intervals contributed by one prism crossing; returns new count."""
    t_top = top - z0
    t_base = base - z0
    if r_in > 0.0:
        a = _first_v(mv, H, r_in, t_top, True)
        b = _first_v(mv, H, r_in, t_base, False)
        if a < b:
            st[n] = a
            en[n] = b
            n += 1
    if t_top > 0.0:
        a = _first_v(mv, H, r_in, t_top, False)
        b = _first_v(mv, H, r_out, t_top, False)
        if a < b:
            st[n] = a
            en[n] = b
            n += 1
    elif t_top < 0.0:
        a = _first_v(mv, H, r_out, t_top, True)
        b = _first_v(mv, H, r_in, t_top, True)
        if a < b:
            st[n] = a
            en[n] = b
            n += 1
    a = _first_v(mv, H, r_out, t_top, True)
    b = _first_v(mv, H, r_out, t_base, False)
    if a < b:
        st[n] = a
        en[n] = b
        n += 1
    return n


@njit(cache=True, inline="always")
def _column_intervals(
    x0, y0, z0, c, s,
    edge_x1, edge_y1, edge_x2, edge_y2, bld_off, bld_base, bld_top, bld_bbox,
    mv, H, rbuf, st, en,
):
    """Row intervals of BUILDING pixels for the column with horizontal
    direction (c, s); intervals may overlap and are not sorted."""
    n = 0
    nb = len(bld_base)
    for bi in range(nb):
        # quick reject: can the forward ray reach the footprint bbox at all
        bx0 = bld_bbox[bi, 0] - x0
        by0 = bld_bbox[bi, 1] - y0
        bx1 = bld_bbox[bi, 2] - x0
        by1 = bld_bbox[bi, 3] - y0
        if c > 0.0:
            if bx1 < 0.0:
                continue
        elif c < 0.0:
            if bx0 > 0.0:
                continue
        if s > 0.0:
            if by1 < 0.0:
                continue
        elif s < 0.0:
            if by0 > 0.0:
                continue
        # 2D slab test against the bbox
        tmin = 0.0
        tmax = np.inf
        if c != 0.0:
            ic = 1.0 / c
            ta = bx0 * ic
            tb = bx1 * ic
            tmin = max(tmin, min(ta, tb))
            tmax = min(tmax, max(ta, tb))
        elif bx0 > 0.0 or bx1 < 0.0:
            continue
        if s != 0.0:
            isv = 1.0 / s
            ta = by0 * isv
            tb = by1 * isv
            tmin = max(tmin, min(ta, tb))
            tmax = min(tmax, max(ta, tb))
        elif by0 > 0.0 or by1 < 0.0:
            continue
        if tmax < tmin:
            continue

        cnt = 0
        for e in range(bld_off[bi], bld_off[bi + 1]):
            x1 = edge_x1[e] - x0
            y1 = edge_y1[e] - y0
            exd = edge_x2[e] - edge_x1[e]
            eyd = edge_y2[e] - edge_y1[e]
            denom = s * exd - c * eyd
            if denom == 0.0:
                continue
            ue = (c * y1 - s * x1) / denom
            if ue < 0.0 or ue >= 1.0:
                continue
            if abs(c) > abs(s):
                r = (x1 + ue * exd) / c
            else:
                r = (y1 + ue * eyd) / s
            if r > 0.0:
                rbuf[cnt] = r
                cnt += 1
        if cnt == 0:
            continue
        # insertion sort; crossing counts are tiny
        for i in range(1, cnt):
            key = rbuf[i]
            j = i - 1
            while j >= 0 and rbuf[j] > key:
                rbuf[j + 1] = rbuf[j]
                j -= 1
            rbuf[j + 1] = key
        k = 0
        if cnt % 2 == 1:
            # camera footprint-interior in xy (above or below the prism):
            # the segment starts at the camera itself
            n = _pair_intervals(mv, H, z0, 0.0, rbuf[0], bld_base[bi], bld_top[bi], st, en, n)
            k = 1
        while k + 1 < cnt + (cnt % 2):
            n = _pair_intervals(
                mv, H, z0, rbuf[k], rbuf[k + 1], bld_base[bi], bld_top[bi], st, en, n
            )
            k += 2
    return n


@njit(cache=True, inline="always")
def _merge_intervals(st, en, n):
    """Sort by start and merge overlaps in place; returns merged count."""
    for i in range(1, n):
        ks = st[i]
        ke = en[i]
        j = i - 1
        while j >= 0 and st[j] > ks:
            st[j + 1] = st[j]
            en[j + 1] = en[j]
            j -= 1
        st[j + 1] = ks
        en[j + 1] = ke
    m = 0
    for i in range(n):
        if m > 0 and st[i] <= en[m - 1]:
            if en[i] > en[m - 1]:
                en[m - 1] = en[i]
        else:
            st[m] = st[i]
            en[m] = en[i]
            m += 1
    return m


@njit(cache=True, inline="always")
def _sweep_column(H, ms, me, nm, rs, re, r0, nr, os_, oe, o0, no):
    """Rows where model and reference building membership differ, skipping
    occluded reference rows.  All interval lists are disjoint and sorted."""
    v = 0
    im = 0
    ir = 0
    io = 0
    count = 0
    while v < H:
        while im < nm and me[im] <= v:
            im += 1
        while ir < nr and re[r0 + ir] <= v:
            ir += 1
        while io < no and oe[o0 + io] <= v:
            io += 1
        inm = im < nm and ms[im] <= v
        inr = ir < nr and rs[r0 + ir] <= v
        ino = io < no and os_[o0 + io] <= v
        nxt = H
        if im < nm:
            b = me[im] if inm else ms[im]
            if b < nxt:
                nxt = b
        if ir < nr:
            b = re[r0 + ir] if inr else rs[r0 + ir]
            if b < nxt:
                nxt = b
        if io < no:
            b = oe[o0 + io] if ino else os_[o0 + io]
            if b < nxt:
                nxt = b
        if inm != inr and not ino:
            count += nxt - v
        v = nxt
    return count


@njit(cache=True, parallel=True)
def _objective_prism(
    px, py, pz, pyaw,
    edge_x1, edge_y1, edge_x2, edge_y2, bld_off, bld_base, bld_top, bld_bbox,
    t_x0, t_y0, t_cell, t_values,
    mv, cos_phi, sin_phi,
    rb_off, rb_s, rb_e, ro_off, ro_s, ro_e,
    W, H, cap, rcap, penalty,
    out_disc,
):
    F = len(px)
    for fi in prange(F):
        st = np.empty(cap, dtype=np.int32)
        en = np.empty(cap, dtype=np.int32)
        rbuf = np.empty(rcap, dtype=np.float64)
        if not _camera_feasible(
            px[fi], py[fi], pz[fi],
            edge_x1, edge_y1, edge_x2, edge_y2, bld_off, bld_base, bld_top, bld_bbox,
            t_x0, t_y0, t_cell, t_values,
        ):
            out_disc[fi] = penalty
            continue
        cy = math.cos(pyaw[fi])
        sy = math.sin(pyaw[fi])
        total = 0
        for u in range(W):
            c = cy * cos_phi[u] - sy * sin_phi[u]
            s = sy * cos_phi[u] + cy * sin_phi[u]
            n = _column_intervals(
                px[fi], py[fi], pz[fi], c, s,
                edge_x1, edge_y1, edge_x2, edge_y2, bld_off, bld_base, bld_top, bld_bbox,
                mv, H, rbuf, st, en,
            )
            n = _merge_intervals(st, en, n)
            base = fi * W + u
            r0 = rb_off[base]
            nr = rb_off[base + 1] - r0
            o0 = ro_off[base]
            no = ro_off[base + 1] - o0
            total += _sweep_column(H, st, en, n, rb_s, rb_e, r0, nr, ro_s, ro_e, o0, no)
        out_disc[fi] = total


@njit(cache=True, parallel=True)
def _render_prism(
    x0, y0, z0, yaw,
    edge_x1, edge_y1, edge_x2, edge_y2, bld_off, bld_base, bld_top, bld_bbox,
    mv, cos_phi, sin_phi,
    cap, rcap, building_label, other_label,
    out,
):
    H = out.shape[0]
    W = out.shape[1]
    cy = math.cos(yaw)
    sy = math.sin(yaw)
    for u in prange(W):
        st = np.empty(cap, dtype=np.int32)
        en = np.empty(cap, dtype=np.int32)
        rbuf = np.empty(rcap, dtype=np.float64)
        c = cy * cos_phi[u] - sy * sin_phi[u]
        s = sy * cos_phi[u] + cy * sin_phi[u]
        n = _column_intervals(
            x0, y0, z0, c, s,
            edge_x1, edge_y1, edge_x2, edge_y2, bld_off, bld_base, bld_top, bld_bbox,
            mv, H, rbuf, st, en,
        )
        for v in range(H):
            out[v, u] = other_label
        for k in range(n):
            for v in range(st[k], en[k]):
                out[v, u] = building_label


@dataclass
class ColumnRefs:
    """Reference masks decomposed into per-column row intervals (CSR layout)."""

    width: int
    height: int
    b_off: np.ndarray
    b_start: np.ndarray
    b_end: np.ndarray
    o_off: np.ndarray
    o_start: np.ndarray
    o_end: np.ndarray
    nonocc: np.ndarray  # (F,) comparable pixel count per frame

    @staticmethod
    def from_masks(masks: list[PanoMask]) -> "ColumnRefs":
        if not masks:
            raise ValueError("need at least one mask")
        H, W = masks[0].labels.shape
        b_parts = []
        o_parts = []
        b_counts = []
        o_counts = []
        nonocc = []
        for m in masks:
            if m.labels.shape != (H, W):
                raise ValueError("masks differ in shape")
            for val, parts, counts in (
                (BUILDING, b_parts, b_counts),
                (OCCLUDED, o_parts, o_counts),
            ):
                t = (m.labels == val).T  # (W, H), rows contiguous per column
                padded = np.zeros((W, H + 2), dtype=np.int8)
                padded[:, 1:-1] = t
                d = np.diff(padded, axis=1)
                cols_s, vs = np.nonzero(d == 1)
                cols_e, ve = np.nonzero(d == -1)
                parts.append((vs.astype(np.int32), ve.astype(np.int32)))
                counts.append(np.bincount(cols_s, minlength=W).astype(np.int64))
            nonocc.append(int(np.count_nonzero(m.labels != OCCLUDED)))

        def assemble(parts, counts):
            off = np.zeros(len(masks) * W + 1, dtype=np.int64)
            per = np.concatenate(counts)
            off[1:] = np.cumsum(per)
            starts = np.concatenate([p[0] for p in parts]) if parts else np.zeros(0, np.int32)
            ends = np.concatenate([p[1] for p in parts]) if parts else np.zeros(0, np.int32)
            return off, starts, ends

        b_off, b_s, b_e = assemble(b_parts, b_counts)
        o_off, o_s, o_e = assemble(o_parts, o_counts)
        return ColumnRefs(
            width=W, height=H,
            b_off=b_off, b_start=b_s, b_end=b_e,
            o_off=o_off, o_start=o_s, o_end=o_e,
            nonocc=np.array(nonocc, dtype=np.int64),
        )


class PrismRaster:
    """Prepared arrays for the column kernels over one scene."""

    def __init__(self, prisms: PrismTables):
        if not fast_path_ok(prisms):
            raise ValueError("scene does not satisfy the column-renderer preconditions")
        self.prisms = prisms
        edges_per = np.diff(prisms.bld_edge_off)
        self.rcap = int(edges_per.max()) + 2 if len(edges_per) else 2
        # three intervals per crossing pair, at most E/2 + B pairs per column
        self.cap = 3 * (len(prisms.edge_x1) // 2 + len(prisms.bld_base) + 2)

    def _phi_tables(self, width: int):
        from .panorama import angle_tables

        _, _, cos_phi, sin_phi = angle_tables(width, width // 2)
        return cos_phi, sin_phi

    def render(self, pose: CameraPose, width: int, height: int) -> PanoMask:
        if not is_upright(pose.orientation):
            raise ValueError("column renderer requires an upright camera")
        p = self.prisms
        cos_phi, sin_phi = self._phi_tables(width)
        out = np.empty((height, width), dtype=np.uint8)
        _render_prism(
            pose.position.x, pose.position.y, pose.position.z, yaw_of(pose.orientation),
            p.edge_x1, p.edge_y1, p.edge_x2, p.edge_y2,
            p.bld_edge_off, p.bld_base, p.bld_top, p.bld_bbox,
            tan_table(height), cos_phi, sin_phi,
            self.cap, self.rcap, np.uint8(BUILDING), np.uint8(NON_BUILDING),
            out,
        )
        return PanoMask(out)

    def discrepancies(self, poses_xyzyaw: np.ndarray, refs: ColumnRefs) -> np.ndarray:
        """Per-frame discrepant-pixel counts against prepared reference columns.

        Infeasible camera positions score a full-frame penalty of W*H.
        """
        p = self.prisms
        W, H = refs.width, refs.height
        cos_phi, sin_phi = self._phi_tables(W)
        F = len(poses_xyzyaw)
        if refs.b_off.shape[0] != F * W + 1:
            raise ValueError("reference column count does not match pose count")
        out = np.zeros(F, dtype=np.int64)
        _objective_prism(
            np.ascontiguousarray(poses_xyzyaw[:, 0]),
            np.ascontiguousarray(poses_xyzyaw[:, 1]),
            np.ascontiguousarray(poses_xyzyaw[:, 2]),
            np.ascontiguousarray(poses_xyzyaw[:, 3]),
            p.edge_x1, p.edge_y1, p.edge_x2, p.edge_y2,
            p.bld_edge_off, p.bld_base, p.bld_top, p.bld_bbox,
            p.terrain_x0, p.terrain_y0, p.terrain_cell, p.terrain_values,
            tan_table(H), cos_phi, sin_phi,
            refs.b_off, refs.b_start, refs.b_end,
            refs.o_off, refs.o_start, refs.o_end,
            W, H, self.cap, self.rcap, np.int64(W * H),
            out,
        )
        return out
