"""Session service for the interactive walkthrough.

One WalkEngine owns a loaded scene, its ray index, and the aligned global
trajectories; each connected viewer gets a Session holding its avatar, its
view state, and its active flood scenario / sun time.  Inputs arrive as JSON
messages (protocol "walk/1") and every input yields one reply packet, so a
recorded input log replays to a byte-identical packet log: all packets are
serialized canonically (sorted keys, no whitespace) and all state updates are
deterministic.

Panorama pixels are static assets addressed by URL; overlay layers are
rendered lazily per (frame, scenario or time) and cached.  Sessions are
independent: per-session input is serialized by the caller (one socket, one
session), scene data is shared read-only, and the overlay cache takes a lock
only to insert.
"""
from __future__ import annotations

import json
import math
import threading
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Optional

from .citymodel import CityScene, scene_to_json, scene_to_mesh, terrain_elevation
from .errors import OutOfBounds, SceneNotLoaded, SessionUnknown
from .geom import Vec3
from .overlays import flood_depth, shadow_mask, water_mask
from .panorama import pgm_bytes, pixel_ray
from .polygon import point_in_polygon
from .raycast import build_ray_index, closest_hit
from .solar import SunState, sun_position
from .viewselect import (
    AvatarState,
    GlobalTrajectory,
    ViewState,
    initial_view,
    maybe_handover,
    step,
)

PROTOCOL = "walk/1"
MAX_STEP_M = 0.5  # avatar speed cap, metres per tick


@dataclass
class Session:
    session_id: str
    avatar: AvatarState
    view: ViewState
    scenario_id: Optional[str] = None
    sun_time: Optional[datetime] = None
    sun: Optional[SunState] = None


def _iso_utc(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _stamp(t: datetime) -> str:
    return t.astimezone(timezone.utc).strftime("%Y%m%dT%H%M%SZ")


def canonical(packet: dict) -> str:
    return json.dumps(packet, sort_keys=True, separators=(",", ":"))


class WalkEngine:
    """Scene + trajectories + sessions; the server side of walk/1."""

    def __init__(
        self,
        scene: CityScene,
        trajectories: list[GlobalTrajectory],
        width: int = 512,
        height: int = 256,
        pano_ext: str = "pgm",
        scene_id: str = "scene",
    ):
        if not trajectories:
            raise SceneNotLoaded("no aligned trajectories loaded")
        self.scene = scene
        self.scene_id = scene_id
        self.mesh = scene_to_mesh(scene)
        self.index = build_ray_index(self.mesh, scene)
        self.trajectories = {t.street_id: t for t in trajectories}
        self._order = [t.street_id for t in trajectories]
        self.width = width
        self.height = height
        self.pano_ext = pano_ext
        self.sessions: dict[str, Session] = {}
        self._next_id = 0
        self._overlay_lock = threading.Lock()
        self._overlay_jobs: dict[str, tuple] = {}
        self._overlay_cache: dict[str, bytes] = {}
        self._under_water: dict[tuple[str, int, str], bool] = {}

    # -- lifecycle ---------------------------------------------------------

    def create_session(self, scene_id: Optional[str] = None) -> str:
        if scene_id is not None and scene_id != self.scene_id:
            raise SceneNotLoaded(f"scene {scene_id!r} is not loaded")
        traj = self.trajectories[self._order[0]]
        view = initial_view(traj)
        frame = view.frame()
        fwd = frame.forward()
        h = math.hypot(fwd.x, fwd.y)
        # spawn the avatar alpha ahead of the first viewpoint, on the ground
        if h > 1e-12:
            ax = frame.position.x + view.alpha_m * fwd.x / h
            ay = frame.position.y + view.alpha_m * fwd.y / h
        else:
            ax, ay = frame.position.x, frame.position.y
        az = self._ground(ax, ay, frame.position.z)
        sid = f"s{self._next_id}"
        self._next_id += 1
        self.sessions[sid] = Session(
            session_id=sid,
            avatar=AvatarState(position=Vec3(ax, ay, az)),
            view=view,
        )
        return sid

    def drop_session(self, session_id: str) -> None:
        self.sessions.pop(session_id, None)

    def _session(self, session_id: str) -> Session:
        s = self.sessions.get(session_id)
        if s is None:
            raise SessionUnknown(session_id)
        return s

    def _ground(self, x: float, y: float, fallback_z: float) -> float:
        try:
            return terrain_elevation(self.scene.terrain, x, y)
        except OutOfBounds:
            return fallback_z

    # -- message handling --------------------------------------------------

    def hello(self, session_id: str) -> dict:
        return {
            "type": "hello",
            "proto": PROTOCOL,
            "session": session_id,
            "scene": self.scene_id,
            "streets": self._order,
            "scenarios": [w.scenario_id for w in self.scene.water],
            "pano_size": [self.width, self.height],
        }

    def handle(self, session_id: str, msg: dict) -> dict:
        """One reply packet per input message; errors become error packets."""
        try:
            s = self._session(session_id)
        except SessionUnknown as e:
            return {"type": "error", "code": "SessionUnknown", "detail": str(e)}
        kind = msg.get("type")
        if kind == "move":
            return self._on_move(s, msg)
        if kind == "scenario":
            return self._on_scenario(s, msg)
        if kind == "time":
            return self._on_time(s, msg)
        if kind == "click":
            return self._on_click(s, msg)
        return {"type": "error", "code": "BadMessage", "detail": f"unknown type {kind!r}"}

    def handle_text(self, session_id: str, text: str) -> str:
        try:
            msg = json.loads(text)
            if not isinstance(msg, dict):
                raise ValueError("message must be a JSON object")
        except ValueError as e:
            return canonical({"type": "error", "code": "BadMessage", "detail": str(e)})
        return canonical(self.handle(session_id, msg))

    def _on_move(self, s: Session, msg: dict) -> dict:
        try:
            dx = float(msg.get("dx", 0.0))
            dy = float(msg.get("dy", 0.0))
        except (TypeError, ValueError):
            return {"type": "error", "code": "BadMessage", "detail": "dx/dy must be numbers"}
        if not (math.isfinite(dx) and math.isfinite(dy)):
            return {"type": "error", "code": "BadMessage", "detail": "dx/dy must be finite"}
        n = math.hypot(dx, dy)
        if n > MAX_STEP_M:
            dx *= MAX_STEP_M / n
            dy *= MAX_STEP_M / n
        p = s.avatar.position
        nx, ny = p.x + dx, p.y + dy
        try:
            nz = terrain_elevation(self.scene.terrain, nx, ny)
        except OutOfBounds:
            nx, ny, nz = p.x, p.y, p.z  # refuse to leave the mapped area
        s.avatar = AvatarState(position=Vec3(nx, ny, nz))
        s.view = maybe_handover(s.view, s.avatar, list(self.trajectories.values()))
        s.view = step(s.view, s.avatar)
        return self.view_packet(s)

    def _on_scenario(self, s: Session, msg: dict) -> dict:
        sid = msg.get("id")
        if sid is not None:
            if self.scene.scenario(sid) is None:
                return {"type": "error", "code": "UnknownScenario", "detail": str(sid)}
        s.scenario_id = sid
        return self.view_packet(s)

    def _on_time(self, s: Session, msg: dict) -> dict:
        iso = msg.get("iso")
        if iso is None:
            s.sun_time = None
            s.sun = None
            return self.view_packet(s)
        try:
            t = datetime.fromisoformat(str(iso).replace("Z", "+00:00"))
        except ValueError:
            return {"type": "error", "code": "BadMessage", "detail": f"bad timestamp {iso!r}"}
        if t.tzinfo is None:
            t = t.replace(tzinfo=timezone.utc)
        s.sun_time = t
        s.sun = sun_position(t, self.scene.origin)
        return self.view_packet(s)

    def _on_click(self, s: Session, msg: dict) -> dict:
        try:
            u = float(msg["u"])
            v = float(msg["v"])
        except (KeyError, TypeError, ValueError):
            return {"type": "error", "code": "BadMessage", "detail": "click needs numeric u,v"}
        if not (0 <= u < self.width and 0 <= v < self.height):
            return {"type": "error", "code": "BadMessage", "detail": "u,v outside the panorama"}
        frame = s.view.frame()
        d = s.view.q_view().rotate(pixel_ray(u, v, self.width, self.height))
        p = frame.position
        t, ti = closest_hit(self.index, (p.x, p.y, p.z), (d.x, d.y, d.z))
        row = int(self.index.tri_building[ti]) if ti >= 0 else -1
        if row < 0:  # sky or terrain
            return {"type": "error", "code": "NoBuildingAtPixel", "detail": f"({u:g},{v:g})"}
        bid = self.index.building_ids[row]
        b = self.scene.building(bid)
        depth = None
        if s.scenario_id is not None and b is not None:
            depth = flood_depth(self.scene, bid, s.scenario_id)
        return {
            "type": "info",
            "building": bid,
            "height": b.height if b else None,
            "attributes": dict(b.attributes) if b else {},
            "scenario": s.scenario_id,
            "flood_depth": depth,
            "distance": t,
        }

    # -- packets and overlays ------------------------------------------------

    def view_packet(self, s: Session) -> dict:
        street = s.view.trajectory.street_id
        i = s.view.frame_index
        frame = s.view.frame()
        q = s.view.q_view()
        overlays: dict[str, Optional[str]] = {"water": None, "shadow": None}
        flags = {"camera_under_water": False, "sun_below_horizon": False}
        if s.scenario_id is not None:
            key = f"water-{street}-{i}-{s.scenario_id}"
            self._register(key, ("water", street, i, s.scenario_id))
            overlays["water"] = f"/overlay/{key}.pgm"
            flags["camera_under_water"] = self._camera_under_water(street, i, s.scenario_id)
        if s.sun is not None:
            if s.sun.above_horizon:
                stamp = _stamp(s.sun_time)
                key = f"shadow-{street}-{i}-{stamp}"
                self._register(key, ("shadow", street, i, s.sun))
                overlays["shadow"] = f"/overlay/{key}.pgm"
            else:
                flags["sun_below_horizon"] = True
        return {
            "type": "view",
            "street": street,
            "frame": i,
            "asset": f"/pano/{street}/{i}.{self.pano_ext}",
            "q_view": [q.w, q.x, q.y, q.z],
            "frame_position": [frame.position.x, frame.position.y, frame.position.z],
            "avatar": [s.avatar.position.x, s.avatar.position.y, s.avatar.position.z],
            "overlays": overlays,
            "flags": flags,
            "scenario": s.scenario_id,
            "time": _iso_utc(s.sun_time) if s.sun_time is not None else None,
        }

    def _camera_under_water(self, street: str, i: int, scenario_id: str) -> bool:
        key = (street, i, scenario_id)
        got = self._under_water.get(key)
        if got is None:
            w = self.scene.scenario(scenario_id)
            p = self.trajectories[street].frames[i].position
            got = p.z < w.level and point_in_polygon(p.x, p.y, w.extent)
            self._under_water[key] = got
        return got

    def _register(self, key: str, job: tuple) -> None:
        if key not in self._overlay_jobs:
            with self._overlay_lock:
                self._overlay_jobs.setdefault(key, job)

    def overlay_bytes(self, key: str) -> Optional[bytes]:
        """Render-on-first-fetch; packets register what each key means."""
        got = self._overlay_cache.get(key)
        if got is not None:
            return got
        job = self._overlay_jobs.get(key)
        if job is None:
            return None
        kind, street, i, param = job
        pose = self.trajectories[street].frames[i]
        if kind == "water":
            w = self.scene.scenario(param)
            grid = water_mask(self.index, pose, w, self.width, self.height).grid
        else:
            grid = shadow_mask(self.index, pose, param, self.width, self.height)
        data = pgm_bytes(grid)
        with self._overlay_lock:
            self._overlay_cache.setdefault(key, data)
        return self._overlay_cache[key]

    def scene_json(self) -> str:
        return scene_to_json(self.scene)
