"""Planar/AABB geometry shared by the simulator and the oracles.

Objects are upright primitives (roll = pitch = 0 while resting), so all
support and containment questions reduce to 2D tests in the support
object's yaw frame plus z comparisons. World-frame AABBs of yawed boxes
are used for proximity (surface gap) and contact logging.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .scene import ObjectRecord, ObjectShape, Pose


def to_local_xy(point_xy: tuple[float, float], frame: Pose) -> tuple[float, float]:
    """Express a world (x, y) in ``frame``'s yaw-rotated frame."""
    dx = point_xy[0] - frame.position[0]
    dy = point_xy[1] - frame.position[1]
    c, s = math.cos(frame.yaw), math.sin(frame.yaw)
    return (c * dx + s * dy, -s * dx + c * dy)


def footprint_contains(
    record: ObjectRecord, pose: Pose, point_xy: tuple[float, float], shrink: float = 0.0
) -> bool:
    """Is a world (x, y) inside the object's top footprint, shrunk by ``shrink``?"""
    lx, ly = to_local_xy(point_xy, pose)
    hx, hy, _ = record.half_extents
    if record.shape is ObjectShape.CYLINDER:
        r = hx - shrink
        return r > 0 and math.hypot(lx, ly) <= r
    return abs(lx) <= hx - shrink and abs(ly) <= hy - shrink


def cavity_contains_xy(record: ObjectRecord, pose: Pose, point_xy: tuple[float, float]) -> bool:
    """Is a world (x, y) inside a container's cavity opening?"""
    if not record.is_container or record.cavity_half_extents is None:
        return False
    lx, ly = to_local_xy(point_xy, pose)
    cx, cy, _ = record.cavity_half_extents
    if record.shape is ObjectShape.CYLINDER:
        return math.hypot(lx, ly) <= cx
    return abs(lx) <= cx and abs(ly) <= cy


def cavity_floor_z(record: ObjectRecord, pose: Pose) -> float:
    """Cavity floor height: the rim minus the cavity depth."""
    assert record.cavity_half_extents is not None
    rim = pose.position[2] + record.half_extents[2]
    return rim - 2.0 * record.cavity_half_extents[2]


def rim_z(record: ObjectRecord, pose: Pose) -> float:
    return pose.position[2] + record.half_extents[2]


@dataclass(frozen=True)
class Aabb:
    lo: tuple[float, float, float]
    hi: tuple[float, float, float]

    def intersects(self, other: "Aabb") -> bool:
        return all(self.lo[i] <= other.hi[i] and other.lo[i] <= self.hi[i] for i in range(3))


def world_aabb(record: ObjectRecord, pose: Pose) -> Aabb:
    """Axis-aligned bounds of the (possibly yawed) primitive."""
    hx, hy, hz = record.half_extents
    if record.shape is ObjectShape.CYLINDER:
        ex, ey = hx, hy
    else:
        c, s = abs(math.cos(pose.yaw)), abs(math.sin(pose.yaw))
        ex = hx * c + hy * s
        ey = hx * s + hy * c
    x, y, z = pose.position
    return Aabb(lo=(x - ex, y - ey, z - hz), hi=(x + ex, y + ey, z + hz))


def aabb_gap(a: Aabb, b: Aabb) -> float:
    """Euclidean distance between two AABBs (0 when they touch or overlap)."""
    total = 0.0
    for i in range(3):
        g = max(a.lo[i] - b.hi[i], b.lo[i] - a.hi[i], 0.0)
        total += g * g
    return math.sqrt(total)


def surface_gap(rec_a: ObjectRecord, pose_a: Pose, rec_b: ObjectRecord, pose_b: Pose) -> float:
    return aabb_gap(world_aabb(rec_a, pose_a), world_aabb(rec_b, pose_b))


def corners_xy(record: ObjectRecord, pose: Pose) -> list[tuple[float, float]]:
    """World (x, y) of the footprint corners (box) or extreme points (cylinder)."""
    hx, hy, _ = record.half_extents
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    x0, y0 = pose.position[0], pose.position[1]
    pts = []
    for sx, sy in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
        lx, ly = sx * hx, sy * hy
        pts.append((x0 + c * lx - s * ly, y0 + s * lx + c * ly))
    return pts


def fully_inside_cavity(
    rec_a: ObjectRecord, pose_a: Pose, rec_c: ObjectRecord, pose_c: Pose
) -> bool:
    """Is object A's volume entirely inside container C's cavity?"""
    if not rec_c.is_container or rec_c.cavity_half_extents is None:
        return False
    bottom = pose_a.position[2] - rec_a.half_extents[2]
    top = pose_a.position[2] + rec_a.half_extents[2]
    if bottom < cavity_floor_z(rec_c, pose_c) - 1e-9 or top > rim_z(rec_c, pose_c) + 1e-9:
        return False
    cx, cy, _ = rec_c.cavity_half_extents
    if rec_a.shape is ObjectShape.CYLINDER:
        lx, ly = to_local_xy((pose_a.position[0], pose_a.position[1]), pose_c)
        r = rec_a.half_extents[0]
        if rec_c.shape is ObjectShape.CYLINDER:
            return math.hypot(lx, ly) + r <= cx + 1e-9
        return abs(lx) + r <= cx + 1e-9 and abs(ly) + r <= cy + 1e-9
    for corner in corners_xy(rec_a, pose_a):
        lx, ly = to_local_xy(corner, pose_c)
        if rec_c.shape is ObjectShape.CYLINDER:
            if math.hypot(lx, ly) > cx + 1e-9:
                return False
        elif abs(lx) > cx + 1e-9 or abs(ly) > cy + 1e-9:
            return False
    return True
