"""Deterministic kinematic tabletop simulator.

Quasi-static and purely kinematic: the end-effector teleports by clamped
deltas, a closing gripper near an object's top face attaches it, a carried
object tracks the end-effector, and releasing resolves support (table,
stable stack, or container cavity) in one shot. No dynamics, no friction,
no pushing; lateral contact with confounders is logged, never resolved.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable

from .geometry import (
    Aabb,
    cavity_contains_xy,
    cavity_floor_z,
    footprint_contains,
    rim_z,
    world_aabb,
)
from .scene import ObjectDatabase, Pose, SceneConfig, SceneError

EVENT_GRASP = "grasp"
EVENT_RELEASE = "release"
EVENT_CONFOUNDER_CONTACT = "confounder_contact"
EVENT_UNSTABLE = "unstable_placement"

SUPPORT_TABLE = "table"
SUPPORT_ON = "on"
SUPPORT_IN = "in"
SUPPORT_HELD = "held"


class InvalidActionError(ValueError):
    """Non-finite or structurally invalid action from a policy."""


@dataclass(frozen=True)
class ActionCommand:
    delta_pos: tuple[float, float, float]
    delta_rot: tuple[float, float, float]
    delta_grip: float

    @classmethod
    def from_vector(cls, values: Iterable[float]) -> "ActionCommand":
        vals = [float(v) for v in values]
        if len(vals) != 7:
            raise InvalidActionError(f"action needs 7 components, got {len(vals)}")
        if not all(math.isfinite(v) for v in vals):
            raise InvalidActionError(f"action has non-finite components: {vals}")
        return cls(delta_pos=tuple(vals[0:3]), delta_rot=tuple(vals[3:6]), delta_grip=vals[6])

    def to_vector(self) -> list[float]:
        return [*self.delta_pos, *self.delta_rot, self.delta_grip]

    @classmethod
    def zero(cls) -> "ActionCommand":
        return cls(delta_pos=(0.0, 0.0, 0.0), delta_rot=(0.0, 0.0, 0.0), delta_grip=0.0)


@dataclass(frozen=True)
class EpisodeConfig:
    max_steps: int = 120
    translation_clamp: float = 0.10  # max translation norm per step, meters
    rotation_clamp: float = 0.20  # max per-axis rotation per step, radians
    grasp_radius: float = 0.04  # distance from ee to a grasp point, meters
    support_margin: float = 0.01  # footprint shrink for stable stacking
    ee_half_extent: float = 0.02  # gripper body for contact logging
    lift_height: float = 0.02  # task 1: minimum clearance above the table
    lift_frames: int = 5  # task 1: consecutive frames at clearance
    near_dist: float = 0.05  # task 2: max surface gap
    home_position: tuple[float, float, float] = (0.0, -0.25, 0.30)

    def __post_init__(self) -> None:
        if min(
            self.max_steps,
            self.translation_clamp,
            self.rotation_clamp,
            self.grasp_radius,
            self.support_margin,
            self.lift_height,
            self.lift_frames,
            self.near_dist,
        ) <= 0:
            raise SceneError("episode config values must be positive")


@dataclass(frozen=True)
class Event:
    frame: int
    kind: str
    obj: str

    def as_list(self) -> list:
        return [self.frame, self.kind, self.obj]


@dataclass(frozen=True)
class Attachment:
    key: str
    offset: tuple[float, float, float]  # object center minus ee, world frame


@dataclass(frozen=True)
class WorldState:
    ee_pose: Pose
    aperture: float  # 1 = fully open, 0 = closed
    attached: Attachment | None
    object_poses: dict[str, Pose]
    supports: dict[str, tuple[str, str | None]]
    frame: int
    events: tuple[Event, ...]

    def pose_of(self, key: str) -> Pose:
        return self.object_poses[key]

    def events_at(self, frame: int) -> list[Event]:
        return [e for e in self.events if e.frame == frame]


def init_world(scene: SceneConfig, db: ObjectDatabase, cfg: EpisodeConfig | None = None) -> WorldState:
    cfg = cfg or EpisodeConfig()
    poses: dict[str, Pose] = {}
    supports: dict[str, tuple[str, str | None]] = {}
    for obj in scene.objects:
        db.get(obj.record_id)  # raises on unresolvable ids
        if obj.record_id in poses:
            raise SceneError(f"duplicate object key {obj.record_id!r} in scene")
        poses[obj.record_id] = obj.pose
        supports[obj.record_id] = (SUPPORT_TABLE, None)
    return WorldState(
        ee_pose=Pose(position=cfg.home_position, orientation=(0.0, 0.0, 0.0)),
        aperture=1.0,
        attached=None,
        object_poses=poses,
        supports=supports,
        frame=0,
        events=(),
    )


def clamp_action(action: ActionCommand, cfg: EpisodeConfig) -> ActionCommand:
    """Scale translation to the norm clamp; clip rotation per axis and grip."""
    if not all(math.isfinite(v) for v in action.to_vector()):
        raise InvalidActionError(f"non-finite action: {action.to_vector()}")
    dx, dy, dz = action.delta_pos
    norm = math.sqrt(dx * dx + dy * dy + dz * dz)
    if norm > cfg.translation_clamp:
        scale = cfg.translation_clamp / norm
        dx, dy, dz = dx * scale, dy * scale, dz * scale
    rot = tuple(max(-cfg.rotation_clamp, min(cfg.rotation_clamp, r)) for r in action.delta_rot)
    grip = max(-1.0, min(1.0, action.delta_grip))
    return ActionCommand(delta_pos=(dx, dy, dz), delta_rot=rot, delta_grip=grip)


def _grasp_candidates(
    state: WorldState, db: ObjectDatabase, ee_pos: tuple[float, float, float], radius: float
) -> list[tuple[float, str]]:
    found = []
    for key, pose in state.object_poses.items():
        rec = db.get(key)
        if not rec.graspable:
            continue
        top = (pose.position[0], pose.position[1], pose.position[2] + rec.half_height)
        d = math.dist(ee_pos, top)
        if d <= radius:
            found.append((d, key))
    return sorted(found)


def settle(
    state: WorldState, released_key: str, db: ObjectDatabase, cfg: EpisodeConfig
) -> WorldState:
    """Resolve the rest pose of a just-released object.

    Order: container cavity (center over the opening, bottom below the rim),
    then stable stack (center inside a margin-shrunk top footprint), then an
    unstable overhang (drops to the table, logged), then plain table rest.
    """
    rec = db.get(released_key)
    pose = state.object_poses[released_key]
    x, y, z = pose.position
    bottom = z - rec.half_height
    events = list(state.events)

    container_hits: list[tuple[float, str]] = []
    for key, other_pose in state.object_poses.items():
        if key == released_key:
            continue
        other = db.get(key)
        if not other.is_container:
            continue
        if cavity_contains_xy(other, other_pose, (x, y)) and bottom < rim_z(other, other_pose):
            d = math.hypot(x - other_pose.position[0], y - other_pose.position[1])
            container_hits.append((d, key))
    if container_hits:
        _, ckey = min(container_hits)
        crec, cpose = db.get(ckey), state.object_poses[ckey]
        new_z = cavity_floor_z(crec, cpose) + rec.half_height
        new_pose = Pose(position=(x, y, new_z), orientation=pose.orientation)
        poses = dict(state.object_poses)
        poses[released_key] = new_pose
        supports = dict(state.supports)
        supports[released_key] = (SUPPORT_IN, ckey)
        return replace(state, object_poses=poses, supports=supports, events=tuple(events))

    stack_hits: list[tuple[float, float, str]] = []  # (-top_z, distance, key)
    overhang = False
    for key, other_pose in state.object_poses.items():
        if key == released_key:
            continue
        other = db.get(key)
        if footprint_contains(other, other_pose, (x, y), shrink=cfg.support_margin):
            top = other_pose.position[2] + other.half_height
            d = math.hypot(x - other_pose.position[0], y - other_pose.position[1])
            stack_hits.append((-top, d, key))
        elif footprint_contains(other, other_pose, (x, y), shrink=0.0):
            overhang = True
    if stack_hits:
        neg_top, _, skey = min(stack_hits)
        new_pose = Pose(position=(x, y, -neg_top + rec.half_height), orientation=pose.orientation)
        poses = dict(state.object_poses)
        poses[released_key] = new_pose
        supports = dict(state.supports)
        supports[released_key] = (SUPPORT_ON, skey)
        return replace(state, object_poses=poses, supports=supports, events=tuple(events))

    if overhang:
        events.append(Event(frame=state.frame, kind=EVENT_UNSTABLE, obj=released_key))
    new_pose = Pose(position=(x, y, rec.half_height), orientation=pose.orientation)
    poses = dict(state.object_poses)
    poses[released_key] = new_pose
    supports = dict(state.supports)
    supports[released_key] = (SUPPORT_TABLE, None)
    return replace(state, object_poses=poses, supports=supports, events=tuple(events))


def step(
    state: WorldState, action: ActionCommand, cfg: EpisodeConfig, db: ObjectDatabase,
    confounder_keys: frozenset[str] = frozenset(),
) -> WorldState:
    """Advance one frame: move, track carried object, handle gripper edges.

    Gripper edges are edge-triggered on the 0.5 aperture line: closing past
    it may attach the nearest graspable object whose top-center is within
    ``grasp_radius`` of the (post-move) end-effector; opening past it
    releases and settles. Contact with confounders is logged per frame.
    """
    act = clamp_action(action, cfg)
    old_aperture = state.aperture
    frame = state.frame

    ex, ey, ez = state.ee_pose.position
    nx, ny, nz = ex + act.delta_pos[0], ey + act.delta_pos[1], max(0.0, ez + act.delta_pos[2])
    rr, rp, ry = (o + d for o, d in zip(state.ee_pose.orientation, act.delta_rot))
    ee_pose = Pose(position=(nx, ny, nz), orientation=(rr, rp, ry))
    aperture = max(0.0, min(1.0, old_aperture + act.delta_grip))

    poses = dict(state.object_poses)
    supports = dict(state.supports)
    attached = state.attached
    events: list[Event] = list(state.events)

    if attached is not None:
        carried = poses[attached.key]
        poses[attached.key] = Pose(
            position=(
                nx + attached.offset[0],
                ny + attached.offset[1],
                nz + attached.offset[2],
            ),
            orientation=carried.orientation,
        )

    new_state = WorldState(
        ee_pose=ee_pose,
        aperture=aperture,
        attached=attached,
        object_poses=poses,
        supports=supports,
        frame=frame,
        events=tuple(events),
    )

    closing = old_aperture >= 0.5 and aperture < 0.5
    opening = old_aperture <= 0.5 and aperture > 0.5

    if closing and attached is None:
        candidates = _grasp_candidates(new_state, db, (nx, ny, nz), cfg.grasp_radius)
        if candidates:
            _, key = candidates[0]
            pose = poses[key]
            offset = (
                pose.position[0] - nx,
                pose.position[1] - ny,
                pose.position[2] - nz,
            )
            attached = Attachment(key=key, offset=offset)
            supports = dict(supports)
            supports[key] = (SUPPORT_HELD, None)
            events.append(Event(frame=frame, kind=EVENT_GRASP, obj=key))
            new_state = replace(
                new_state, attached=attached, supports=supports, events=tuple(events)
            )

    if opening and attached is not None:
        events.append(Event(frame=frame, kind=EVENT_RELEASE, obj=attached.key))
        new_state = replace(new_state, attached=None, events=tuple(events))
        new_state = settle(new_state, attached.key, db, cfg)
        attached = None

    # Contact logging against confounders (never displaces anything).
    if confounder_keys:
        h = cfg.ee_half_extent
        ee_box = Aabb(lo=(nx - h, ny - h, nz - h), hi=(nx + h, ny + h, nz + h))
        carried_box = None
        if new_state.attached is not None:
            ckey = new_state.attached.key
            carried_box = world_aabb(db.get(ckey), new_state.object_poses[ckey])
        contact_events = list(new_state.events)
        for key in sorted(confounder_keys):
            if key not in new_state.object_poses:
                continue
            box = world_aabb(db.get(key), new_state.object_poses[key])
            hit = ee_box.intersects(box) or (
                carried_box is not None and key != new_state.attached.key
                and carried_box.intersects(box)
            )
            if hit:
                contact_events.append(
                    Event(frame=frame, kind=EVENT_CONFOUNDER_CONTACT, obj=key)
                )
        new_state = replace(new_state, events=tuple(contact_events))

    return replace(new_state, frame=frame + 1)
