"""Frame and view-orientation selection for the avatar walkthrough.

The avatar moves freely; panoramas exist only at discrete camera positions
along each captured street.  Every tick the walkthrough:

* keeps the displayed frame i near the avatar: with d the signed distance of
  the avatar from viewpoint i along that frame's forward axis, advance to
  i+1 when d > alpha, retreat to i-1 when d < -alpha (one step per tick)
* eases the view orientation toward "look from the viewpoint at the avatar's
  chest": the relative orientation q_rel is pulled toward that target by a
  fixed contraction (angle shrinks by the smoothing factor each tick), then
  composed with the frame orientation to give the rendered view
* hands the avatar over to another street's trajectory when it has strayed
  more than 8 m from the current one and some other trajectory passes within
  5 m, resetting the relative orientation
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

from .errors import DegenerateDirection, GimbalCase
from .geom import CameraPose, Quaternion, UNIT_Z, Vec3, look_at_quaternion, slerp

CHEST_HEIGHT_M = 1.4
DEFAULT_ALPHA_M = 5.0
DEFAULT_SMOOTHING = 0.96
HANDOVER_LEAVE_M = 8.0
HANDOVER_JOIN_M = 5.0
TICKS_PER_SECOND = 30


@dataclass(frozen=True)
class GlobalTrajectory:
    street_id: str
    frames: list[CameraPose]


@dataclass(frozen=True)
class AvatarState:
    position: Vec3  # feet, z on the terrain


@dataclass(frozen=True)
class ViewState:
    trajectory: GlobalTrajectory
    frame_index: int
    q_rel: Quaternion  # view orientation relative to the frame's camera
    alpha_m: float = DEFAULT_ALPHA_M
    smoothing: float = DEFAULT_SMOOTHING

    def frame(self) -> CameraPose:
        return self.trajectory.frames[self.frame_index]

    def q_view(self) -> Quaternion:
        return self.q_rel * self.frame().orientation


def initial_view(traj: GlobalTrajectory) -> ViewState:
    if not traj.frames:
        raise ValueError(f"trajectory {traj.street_id!r} has no frames")
    return ViewState(trajectory=traj, frame_index=0, q_rel=Quaternion.identity())


def signed_forward_distance(pose: CameraPose, avatar_position: Vec3) -> float:
    """Avatar offset from the viewpoint, projected on the camera forward axis."""
    return pose.forward().dot(avatar_position - pose.position)


def update_viewpoint(state: ViewState, avatar: AvatarState) -> ViewState:
    """At most one frame step per tick; no change while |d| <= alpha."""
    d = signed_forward_distance(state.frame(), avatar.position)
    i = state.frame_index
    if d > state.alpha_m and i + 1 < len(state.trajectory.frames):
        return replace(state, frame_index=i + 1)
    if d < -state.alpha_m and i > 0:
        return replace(state, frame_index=i - 1)
    return state


def _target_q_rel(state: ViewState, avatar: AvatarState) -> Optional[Quaternion]:
    frame = state.frame()
    chest = avatar.position + Vec3(0.0, 0.0, CHEST_HEIGHT_M)
    try:
        q_avatar = look_at_quaternion(frame.position, chest)
    except DegenerateDirection:
        return None
    except GimbalCase:
        try:
            q_avatar = look_at_quaternion(frame.position, chest, up_hint=frame.orientation.rotate(UNIT_Z))
        except GimbalCase:
            return None
    return q_avatar * frame.orientation.inverse()


def update_orientation(state: ViewState, avatar: AvatarState) -> ViewState:
    target = _target_q_rel(state, avatar)
    if target is None:
        return state
    q_rel = slerp(target, state.q_rel, state.smoothing)
    return replace(state, q_rel=q_rel)


def step(state: ViewState, avatar: AvatarState) -> ViewState:
    """One walkthrough tick: frame selection, then orientation easing."""
    return update_orientation(update_viewpoint(state, avatar), avatar)


def _segment_distance_xy(p: Vec3, a: Vec3, b: Vec3) -> float:
    vx, vy = b.x - a.x, b.y - a.y
    wx, wy = p.x - a.x, p.y - a.y
    vv = vx * vx + vy * vy
    t = 0.0 if vv == 0.0 else max(0.0, min(1.0, (wx * vx + wy * vy) / vv))
    dx = wx - t * vx
    dy = wy - t * vy
    return math.hypot(dx, dy)


def trajectory_distance_xy(traj: GlobalTrajectory, position: Vec3) -> float:
    """Horizontal distance from a point to the trajectory polyline."""
    frames = traj.frames
    if len(frames) == 1:
        return math.hypot(position.x - frames[0].position.x, position.y - frames[0].position.y)
    return min(
        _segment_distance_xy(position, frames[k].position, frames[k + 1].position)
        for k in range(len(frames) - 1)
    )


def nearest_frame(traj: GlobalTrajectory, position: Vec3) -> tuple[int, float]:
    best_i = 0
    best_d = math.inf
    for i, f in enumerate(traj.frames):
        d = math.hypot(position.x - f.position.x, position.y - f.position.y)
        if d < best_d:
            best_d = d
            best_i = i
    return best_i, best_d


def maybe_handover(
    state: ViewState, avatar: AvatarState, trajectories: list[GlobalTrajectory]
) -> ViewState:
    """Switch to a closer street once the avatar has left the current one.

    Triggers when the avatar is more than 8 m from the current trajectory and
    some other trajectory has a frame within 5 m; the view continues from that
    trajectory's nearest frame with the relative orientation reset.
    """
    if trajectory_distance_xy(state.trajectory, avatar.position) <= HANDOVER_LEAVE_M:
        return state
    best = None
    for traj in trajectories:
        if traj.street_id == state.trajectory.street_id:
            continue
        i, d = nearest_frame(traj, avatar.position)
        if d < HANDOVER_JOIN_M and (best is None or d < best[2]):
            best = (traj, i, d)
    if best is None:
        return state
    traj, i, _ = best
    return ViewState(
        trajectory=traj,
        frame_index=i,
        q_rel=Quaternion.identity(),
        alpha_m=state.alpha_m,
        smoothing=state.smoothing,
    )
