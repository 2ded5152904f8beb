"""Software rasterizer producing the policy's visual observation.

Flat-shaded pinhole rendering of the primitives: each face is filled with
clamp(base_color * intensity * face_factor), faces painted far to near.
Cylinders are drawn as their bounding boxes; silhouette fidelity does not
matter to any oracle, and a single code path keeps output byte-exact and
cheap. This renderer is the only channel through which lighting and camera
changes reach a policy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np

from .camera import project_point, world_to_camera
from .scene import ObjectDatabase, Pose, SceneConfig
from .sim import WorldState

BACKGROUND_GRAY = 45
TABLE_GRAY = 110
TOP_FACE_FACTOR = 1.0
SIDE_FACE_FACTOR = 0.8

# Corner indices of the six faces of a unit box (+z face first: it gets the
# top shading factor; objects never roll or pitch, so local +z is world up).
_FACES = (
    (4, 5, 7, 6),  # +z (top)
    (0, 1, 3, 2),  # -z
    (0, 1, 5, 4),  # -y
    (2, 3, 7, 6),  # +y
    (0, 2, 6, 4),  # -x
    (1, 3, 7, 5),  # +x
)


@dataclass(frozen=True)
class Observation:
    rgb: bytes
    width: int
    height: int
    step: int
    instruction: str
    privileged: dict[str, Any] | None = None

    def __post_init__(self) -> None:
        expected = self.width * self.height * 3
        if len(self.rgb) != expected:
            raise ValueError(f"rgb buffer is {len(self.rgb)} bytes, expected {expected}")

    def as_array(self) -> np.ndarray:
        return np.frombuffer(self.rgb, dtype=np.uint8).reshape(self.height, self.width, 3)


def shade(base: tuple[int, int, int], intensity: float, factor: float) -> tuple[int, int, int]:
    return tuple(min(255, int(math.floor(c * intensity * factor + 0.5))) for c in base)


def _box_corners(pose: Pose, half_extents: tuple[float, float, float]) -> list[tuple[float, float, float]]:
    hx, hy, hz = half_extents
    c, s = math.cos(pose.yaw), math.sin(pose.yaw)
    x0, y0, z0 = pose.position
    corners = []
    for iz in (-1.0, 1.0):
        for iy in (-1.0, 1.0):
            for ix in (-1.0, 1.0):
                lx, ly, lz = ix * hx, iy * hy, iz * hz
                corners.append((x0 + c * lx - s * ly, y0 + s * lx + c * ly, z0 + lz * 1.0))
    # order: index bit0 = x sign, bit1 = y sign, bit2 = z sign
    return corners


def _fill_convex(canvas: np.ndarray, pts: list[tuple[float, float]], color: tuple[int, int, int]) -> None:
    """Paint a convex polygon given in pixel coordinates (u right, v down)."""
    h, w, _ = canvas.shape
    us = [p[0] for p in pts]
    vs = [p[1] for p in pts]
    u0 = max(0, int(math.floor(min(us))))
    u1 = min(w - 1, int(math.ceil(max(us))))
    v0 = max(0, int(math.floor(min(vs))))
    v1 = min(h - 1, int(math.ceil(max(vs))))
    if u0 > u1 or v0 > v1:
        return
    uu, vv = np.meshgrid(
        np.arange(u0, u1 + 1, dtype=np.float64) + 0.5,
        np.arange(v0, v1 + 1, dtype=np.float64) + 0.5,
    )
    pos = np.ones(uu.shape, dtype=bool)
    neg = np.ones(uu.shape, dtype=bool)
    n = len(pts)
    for i in range(n):
        ax, ay = pts[i]
        bx, by = pts[(i + 1) % n]
        cross = (bx - ax) * (vv - ay) - (by - ay) * (uu - ax)
        pos &= cross >= 0.0
        neg &= cross <= 0.0
    inside = pos | neg
    region = canvas[v0 : v1 + 1, u0 : u1 + 1]
    region[inside] = color


def render_rgb(state: WorldState, scene: SceneConfig, db: ObjectDatabase) -> Observation:
    """Deterministic flat-shaded view of the current world state."""
    cam = scene.camera
    w, h = cam.resolution
    intensity = scene.lighting.intensity_scale
    canvas = np.empty((h, w, 3), dtype=np.uint8)
    canvas[:, :] = shade((BACKGROUND_GRAY,) * 3, intensity, 1.0)

    thx, thy = scene.table_half_extents
    table = [(-thx, -thy, 0.0), (thx, -thy, 0.0), (thx, thy, 0.0), (-thx, thy, 0.0)]
    table_px = [project_point(p, cam) for p in table]
    if all(p is not None for p in table_px):
        _fill_convex(canvas, table_px, shade((TABLE_GRAY,) * 3, intensity, 1.0))

    # Gather every face of every object, then paint far to near.
    faces: list[tuple[float, list[tuple[float, float]], tuple[int, int, int]]] = []
    for key in sorted(state.object_poses):
        rec = db.get(key)
        pose = state.object_poses[key]
        corners = _box_corners(pose, rec.half_extents)
        projected = [project_point(p, cam) for p in corners]
        depths = [world_to_camera(p, cam)[2] for p in corners]
        for fi, idxs in enumerate(_FACES):
            pts = [projected[i] for i in idxs]
            if any(p is None for p in pts):
                continue
            depth = sum(depths[i] for i in idxs) / 4.0
            factor = TOP_FACE_FACTOR if fi == 0 else SIDE_FACE_FACTOR
            faces.append((depth, pts, shade(rec.base_color, intensity, factor)))
    faces.sort(key=lambda f: -f[0])
    for _, pts, color in faces:
        _fill_convex(canvas, pts, color)

    return Observation(
        rgb=canvas.tobytes(),
        width=w,
        height=h,
        step=state.frame,
        instruction=scene.task.instruction,
    )


def privileged_block(state: WorldState, scene: SceneConfig, db: ObjectDatabase) -> dict[str, Any]:
    """Ground-truth payload for cheat-mode policies (scripted solvers)."""
    objects: dict[str, Any] = {}
    role_by_key = {o.record_id: o.role.value for o in scene.objects}
    for key in sorted(state.object_poses):
        rec = db.get(key)
        pose = state.object_poses[key]
        objects[key] = {
            "position": list(pose.position),
            "orientation": list(pose.orientation),
            "shape": rec.shape.value,
            "half_extents": list(rec.half_extents),
            "graspable": rec.graspable,
            "is_container": rec.is_container,
            "cavity_half_extents": list(rec.cavity_half_extents)
            if rec.cavity_half_extents
            else None,
            "role": role_by_key.get(key, "confound"),
        }
    return {
        "ee_position": list(state.ee_pose.position),
        "ee_orientation": list(state.ee_pose.orientation),
        "aperture": state.aperture,
        "attached": state.attached.key if state.attached else None,
        "task": {
            "kind": scene.task.kind.value,
            "target_a": scene.task.target_a_id,
            "target_b": scene.task.target_b_id,
        },
        "objects": objects,
    }


def with_privileged(obs: Observation, block: dict[str, Any]) -> Observation:
    return Observation(
        rgb=obs.rgb,
        width=obs.width,
        height=obs.height,
        step=obs.step,
        instruction=obs.instruction,
        privileged=block,
    )


def write_ppm(obs: Observation, path: str | Path) -> Path:
    """Debug dump as binary PPM (P6)."""
    path = Path(path)
    with path.open("wb") as f:
        f.write(f"P6\n{obs.width} {obs.height}\n255\n".encode())
        f.write(obs.rgb)
    return path
