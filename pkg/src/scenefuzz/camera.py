"""Pinhole camera math: rotations, projection, default viewpoint.

Camera frame convention: +z is the optical axis (forward), +x right,
+y down, so image rows grow downward. ``orientation`` is (roll, pitch,
yaw) applied as Rz(yaw) @ Ry(pitch) @ Rx(roll), mapping camera-frame
directions into the world frame.
"""

from __future__ import annotations

import math

from .scene import CameraConfig, SceneError

Vec3 = tuple[float, float, float]
Mat3 = tuple[Vec3, Vec3, Vec3]

DEFAULT_CAMERA_POSITION: Vec3 = (0.0, -0.82, 0.62)
DEFAULT_CAMERA_FOV_DEG = 72.0
DEFAULT_RESOLUTION = (224, 224)


def rotation_matrix(rpy: Vec3) -> Mat3:
    r, p, y = rpy
    cr, sr = math.cos(r), math.sin(r)
    cp, sp = math.cos(p), math.sin(p)
    cy, sy = math.cos(y), math.sin(y)
    return (
        (cy * cp, cy * sp * sr - sy * cr, cy * sp * cr + sy * sr),
        (sy * cp, sy * sp * sr + cy * cr, sy * sp * cr - cy * sr),
        (-sp, cp * sr, cp * cr),
    )


def _cross(a: Vec3, b: Vec3) -> Vec3:
    return (
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    )


def _norm(a: Vec3) -> float:
    return math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])


def _unit(a: Vec3) -> Vec3:
    n = _norm(a)
    if n < 1e-12:
        raise SceneError("cannot normalize near-zero vector")
    return (a[0] / n, a[1] / n, a[2] / n)


def look_at_rpy(eye: Vec3, target: Vec3) -> Vec3:
    """Roll/pitch/yaw for a camera at ``eye`` whose optical axis hits ``target``."""
    fwd = _unit((target[0] - eye[0], target[1] - eye[1], target[2] - eye[2]))
    up: Vec3 = (0.0, 0.0, 1.0)
    right = _cross(fwd, up)
    if _norm(right) < 1e-9:  # looking straight up/down
        up = (0.0, 1.0, 0.0)
        right = _cross(fwd, up)
    right = _unit(right)
    down = _cross(fwd, right)
    # Columns of the camera-to-world rotation are the camera axes in world.
    r00, r10, r20 = right
    r01, r11, r21 = down
    r02, r12, r22 = fwd
    yaw = math.atan2(r10, r00)
    pitch = math.asin(max(-1.0, min(1.0, -r20)))
    roll = math.atan2(r21, r22)
    return (roll, pitch, yaw)


def default_camera(resolution: tuple[int, int] = DEFAULT_RESOLUTION) -> CameraConfig:
    """Fixed viewpoint behind the table edge, framing the whole tabletop."""
    rpy = look_at_rpy(DEFAULT_CAMERA_POSITION, (0.0, 0.0, 0.0))
    return CameraConfig(
        position=DEFAULT_CAMERA_POSITION,
        orientation=rpy,
        fov_deg=DEFAULT_CAMERA_FOV_DEG,
        resolution=resolution,
    )


def world_to_camera(p: Vec3, cam: CameraConfig) -> Vec3:
    rot = rotation_matrix(cam.orientation)
    d = (p[0] - cam.position[0], p[1] - cam.position[1], p[2] - cam.position[2])
    # R^T @ d: rows of R^T are columns of R.
    return (
        rot[0][0] * d[0] + rot[1][0] * d[1] + rot[2][0] * d[2],
        rot[0][1] * d[0] + rot[1][1] * d[1] + rot[2][1] * d[2],
        rot[0][2] * d[0] + rot[1][2] * d[1] + rot[2][2] * d[2],
    )


def focal_px(cam: CameraConfig) -> float:
    w = cam.resolution[0]
    return (w / 2.0) / math.tan(math.radians(cam.fov_deg) / 2.0)


def project_point(p: Vec3, cam: CameraConfig) -> tuple[float, float] | None:
    """Pinhole projection to pixel coordinates; None when behind the camera."""
    x, y, z = world_to_camera(p, cam)
    if z <= 1e-9:
        return None
    f = focal_px(cam)
    w, h = cam.resolution
    return (w / 2.0 + f * x / z, h / 2.0 + f * y / z)


def frames_full_table(cam: CameraConfig, table_half_extents: tuple[float, float]) -> bool:
    """True iff all four tabletop corners project inside the image bounds."""
    hx, hy = table_half_extents
    w, h = cam.resolution
    for sx in (-1.0, 1.0):
        for sy in (-1.0, 1.0):
            uv = project_point((sx * hx, sy * hy, 0.0), cam)
            if uv is None:
                return False
            u, v = uv
            if not (0.0 <= u < w and 0.0 <= v < h):
                return False
    return True
