"""Scene domain model: objects, poses, cameras, lighting, tasks.

A scene is a complete, self-contained test case for a manipulation policy.
Everything here is immutable after construction; scenes can be shared freely
between worker threads. Canonical serialization (sorted keys, confounders
in a fixed order) makes hashing independent of construction order, which is
what suite-level deduplication relies on.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Any, Iterable

SCENE_FILE_SUFFIX = ".scene.json"

# Pose components are quantized to this resolution (meters / radians) before
# hashing so that serialize -> parse -> rehash is stable.
HASH_QUANTUM = 1e-6

MIN_INTENSITY = 1.0 / 20.0
MAX_INTENSITY = 20.0


class SceneError(ValueError):
    """Malformed scene or object-database content."""


class ObjectShape(str, Enum):
    BOX = "box"
    CYLINDER = "cylinder"


class ObjectPool(str, Enum):
    SEEN = "seen"
    UNSEEN = "unseen"


class Role(str, Enum):
    TARGET_A = "target_a"
    TARGET_B = "target_b"
    CONFOUND = "confound"


class TaskKind(str, Enum):
    PICK_UP = "pick_up"
    MOVE_NEAR = "move_near"
    PUT_ON = "put_on"
    PUT_IN = "put_in"

    @property
    def n_targets(self) -> int:
        return 1 if self is TaskKind.PICK_UP else 2


# Standard instruction template per task; "[object name]" placeholders are
# filled left to right with target A's display name, except the last one in
# two-target tasks which takes target B's.
STANDARD_TEMPLATES: dict[TaskKind, str] = {
    TaskKind.PICK_UP: "pick up [object name]",
    TaskKind.MOVE_NEAR: "move [object name] near [object name]",
    TaskKind.PUT_ON: "put [object name] on [object name]",
    TaskKind.PUT_IN: "put [object name] into [object name]",
}

PLACEHOLDER = "[object name]"


def render_instruction(template: str, name_a: str, name_b: str | None = None) -> str:
    """Fill a template's placeholders: last slot gets B, all earlier get A."""
    n = template.count(PLACEHOLDER)
    if n == 0:
        raise SceneError(f"template has no {PLACEHOLDER!r} placeholder: {template!r}")
    if name_b is None:
        if n != 1:
            raise SceneError(f"single-object template expected, got {n} placeholders")
        return template.replace(PLACEHOLDER, name_a)
    if n < 2:
        raise SceneError(f"two-object template needs >= 2 placeholders, got {n}")
    out = template.replace(PLACEHOLDER, name_a, n - 1)
    return out.replace(PLACEHOLDER, name_b)


def normalize_angle(a: float) -> float:
    """Wrap an angle to [-pi, pi)."""
    a = math.fmod(a + math.pi, 2.0 * math.pi)
    if a < 0.0:
        a += 2.0 * math.pi
    return a - math.pi


def _require_finite(name: str, values: Iterable[float]) -> None:
    for v in values:
        if not math.isfinite(v):
            raise SceneError(f"{name} must be finite, got {v!r}")


@dataclass(frozen=True)
class Pose:
    """Position (m) and roll/pitch/yaw (rad) in the table frame.

    Table frame: origin at table center, z up, z=0 at the tabletop.
    Yaw is normalized to [-pi, pi) on construction.
    """

    position: tuple[float, float, float]
    orientation: tuple[float, float, float] = (0.0, 0.0, 0.0)

    def __post_init__(self) -> None:
        _require_finite("position", self.position)
        _require_finite("orientation", self.orientation)
        r, p, y = self.orientation
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "orientation", (float(r), float(p), normalize_angle(float(y))))

    @property
    def yaw(self) -> float:
        return self.orientation[2]


@dataclass(frozen=True)
class ObjectRecord:
    """One entry of an object database.

    ``half_extents`` is (hx, hy, hz) for boxes and (radius, radius,
    half_height) for cylinders. Containers expose an interior opening via
    ``cavity_half_extents`` (same shape convention, measured from the rim
    down: the cavity occupies the top of the body, 2*cavity_hz deep).
    """

    id: str
    display_name: str
    shape: ObjectShape
    half_extents: tuple[float, float, float]
    graspable: bool
    is_container: bool = False
    cavity_half_extents: tuple[float, float, float] | None = None
    base_color: tuple[int, int, int] = (128, 128, 128)
    pool: ObjectPool = ObjectPool.SEEN

    def __post_init__(self) -> None:
        if not self.id:
            raise SceneError("object record needs a non-empty id")
        if any(h <= 0 for h in self.half_extents):
            raise SceneError(f"{self.id}: half_extents must be positive")
        if self.is_container:
            if self.cavity_half_extents is None:
                raise SceneError(f"{self.id}: container without cavity_half_extents")
            if any(c >= h for c, h in zip(self.cavity_half_extents, self.half_extents)):
                raise SceneError(f"{self.id}: cavity must be strictly inside the body")
            if any(c <= 0 for c in self.cavity_half_extents):
                raise SceneError(f"{self.id}: cavity_half_extents must be positive")
        elif self.cavity_half_extents is not None:
            raise SceneError(f"{self.id}: cavity_half_extents on a non-container")
        if not all(0 <= c <= 255 for c in self.base_color):
            raise SceneError(f"{self.id}: base_color components must be 0-255")

    @property
    def half_height(self) -> float:
        return self.half_extents[2]

    @property
    def top_z_resting(self) -> float:
        """Top-face height when the object rests on the table."""
        return 2.0 * self.half_extents[2]


@dataclass(frozen=True)
class ObjectInstance:
    record_id: str
    pose: Pose
    role: Role


@dataclass(frozen=True)
class LightingConfig:
    intensity_scale: float = 1.0

    def __post_init__(self) -> None:
        s = self.intensity_scale
        if not (math.isfinite(s) and MIN_INTENSITY <= s <= MAX_INTENSITY):
            raise SceneError(f"intensity_scale {s!r} outside [{MIN_INTENSITY}, {MAX_INTENSITY}]")


@dataclass(frozen=True)
class CameraConfig:
    position: tuple[float, float, float]
    orientation: tuple[float, float, float]
    fov_deg: float = 60.0
    resolution: tuple[int, int] = (224, 224)

    def __post_init__(self) -> None:
        _require_finite("camera position", self.position)
        _require_finite("camera orientation", self.orientation)
        if not (10.0 < self.fov_deg < 120.0):
            raise SceneError(f"fov_deg {self.fov_deg!r} outside (10, 120)")
        if any(r < 32 for r in self.resolution):
            raise SceneError("resolution components must be >= 32")


@dataclass(frozen=True)
class TaskInstance:
    kind: TaskKind
    instruction: str
    target_a_id: str
    target_b_id: str | None = None

    def __post_init__(self) -> None:
        if not self.instruction:
            raise SceneError("instruction must be non-empty")
        if self.kind.n_targets == 2 and self.target_b_id is None:
            raise SceneError(f"{self.kind.value} requires target_b_id")
        if self.kind.n_targets == 1 and self.target_b_id is not None:
            raise SceneError(f"{self.kind.value} takes no target_b_id")


@dataclass(frozen=True)
class SceneConfig:
    scene_id: str
    seed: int
    objects: tuple[ObjectInstance, ...]
    lighting: LightingConfig
    camera: CameraConfig
    task: TaskInstance
    table_half_extents: tuple[float, float] = (0.40, 0.40)

    def __post_init__(self) -> None:
        # Canonical object order: target_a, target_b, then confounders sorted
        # by (record_id, x, y). Construction order never leaks into equality,
        # serialization, or hashing.
        role_rank = {Role.TARGET_A: 0, Role.TARGET_B: 1, Role.CONFOUND: 2}
        ordered = sorted(
            self.objects,
            key=lambda o: (
                role_rank[o.role],
                o.record_id,
                o.pose.position[0],
                o.pose.position[1],
            ),
        )
        object.__setattr__(self, "objects", tuple(ordered))
        if not (0 <= self.seed < 2**64):
            raise SceneError("seed must fit in 64 unsigned bits")

    def instance(self, role: Role) -> ObjectInstance | None:
        for obj in self.objects:
            if obj.role == role:
                return obj
        return None

    @property
    def target_a(self) -> ObjectInstance:
        inst = self.instance(Role.TARGET_A)
        if inst is None:
            raise SceneError(f"scene {self.scene_id} has no target_a")
        return inst

    @property
    def confounders(self) -> tuple[ObjectInstance, ...]:
        return tuple(o for o in self.objects if o.role == Role.CONFOUND)


@dataclass(frozen=True)
class ObjectDatabase:
    """Immutable id -> record map with per-pool counts."""

    records: dict[str, ObjectRecord]
    source: str = ""

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, record_id: str) -> bool:
        return record_id in self.records

    def get(self, record_id: str) -> ObjectRecord:
        try:
            return self.records[record_id]
        except KeyError:
            raise SceneError(f"unknown object record {record_id!r}") from None

    def ids(self) -> list[str]:
        return sorted(self.records)

    def pool_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for rec in self.records.values():
            counts[rec.pool.value] = counts.get(rec.pool.value, 0) + 1
        return counts


def _record_from_dict(raw: dict[str, Any]) -> ObjectRecord:
    try:
        cavity = raw.get("cavity_half_extents")
        return ObjectRecord(
            id=raw["id"],
            display_name=raw["display_name"],
            shape=ObjectShape(raw["shape"]),
            half_extents=tuple(float(v) for v in raw["half_extents"]),
            graspable=bool(raw["graspable"]),
            is_container=bool(raw.get("is_container", False)),
            cavity_half_extents=tuple(float(v) for v in cavity) if cavity is not None else None,
            base_color=tuple(int(v) for v in raw["base_color"]),
            pool=ObjectPool(raw.get("pool", "seen")),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(f"malformed object record {raw.get('id', '?')!r}: {exc}") from exc


def load_object_db(path: str | Path) -> ObjectDatabase:
    """Load a JSON array of object records; ids must be unique."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read object database {path}: {exc}") from exc
    if not isinstance(raw, list):
        raise SceneError(f"object database {path} must be a JSON array")
    records: dict[str, ObjectRecord] = {}
    for entry in raw:
        rec = _record_from_dict(entry)
        if rec.id in records:
            raise SceneError(f"duplicate object id {rec.id!r} in {path}")
        records[rec.id] = rec
    return ObjectDatabase(records=records, source=str(path))


# --------------------------------------------------------------------------
# Canonical serialization and hashing
# --------------------------------------------------------------------------


def _pose_to_list(pose: Pose) -> list[float]:
    return [*pose.position, *pose.orientation]


def _pose_from_list(vals: list[float]) -> Pose:
    return Pose(position=tuple(vals[:3]), orientation=tuple(vals[3:]))


def _sorted_objects(scene: SceneConfig) -> list[ObjectInstance]:
    """Targets first (a then b), then confounders sorted by (id, x, y)."""
    order = {Role.TARGET_A: 0, Role.TARGET_B: 1}
    targets = sorted(
        (o for o in scene.objects if o.role != Role.CONFOUND), key=lambda o: order[o.role]
    )
    confounders = sorted(
        scene.confounders, key=lambda o: (o.record_id, o.pose.position[0], o.pose.position[1])
    )
    return targets + confounders


def scene_to_dict(scene: SceneConfig) -> dict[str, Any]:
    """Canonical, lossless dict form (stable object order, plain types)."""
    return {
        "scene_id": scene.scene_id,
        "seed": scene.seed,
        "table_half_extents": list(scene.table_half_extents),
        "objects": [
            {
                "record_id": o.record_id,
                "role": o.role.value,
                "pose": _pose_to_list(o.pose),
            }
            for o in _sorted_objects(scene)
        ],
        "lighting": {"intensity_scale": scene.lighting.intensity_scale},
        "camera": {
            "position": list(scene.camera.position),
            "orientation": list(scene.camera.orientation),
            "fov_deg": scene.camera.fov_deg,
            "resolution": list(scene.camera.resolution),
        },
        "task": {
            "kind": scene.task.kind.value,
            "instruction": scene.task.instruction,
            "target_a_id": scene.task.target_a_id,
            "target_b_id": scene.task.target_b_id,
        },
    }


def scene_from_dict(raw: dict[str, Any]) -> SceneConfig:
    try:
        task = raw["task"]
        cam = raw["camera"]
        return SceneConfig(
            scene_id=raw["scene_id"],
            seed=int(raw["seed"]),
            objects=tuple(
                ObjectInstance(
                    record_id=o["record_id"],
                    pose=_pose_from_list(o["pose"]),
                    role=Role(o["role"]),
                )
                for o in raw["objects"]
            ),
            lighting=LightingConfig(intensity_scale=float(raw["lighting"]["intensity_scale"])),
            camera=CameraConfig(
                position=tuple(cam["position"]),
                orientation=tuple(cam["orientation"]),
                fov_deg=float(cam["fov_deg"]),
                resolution=tuple(int(v) for v in cam["resolution"]),
            ),
            task=TaskInstance(
                kind=TaskKind(task["kind"]),
                instruction=task["instruction"],
                target_a_id=task["target_a_id"],
                target_b_id=task.get("target_b_id"),
            ),
            table_half_extents=tuple(raw["table_half_extents"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, SceneError):
            raise
        raise SceneError(f"malformed scene document: {exc}") from exc


def scene_to_json(scene: SceneConfig) -> str:
    return json.dumps(scene_to_dict(scene), sort_keys=True, separators=(",", ":")) + "\n"


def save_scene(scene: SceneConfig, path: str | Path) -> Path:
    path = Path(path)
    path.write_text(scene_to_json(scene))
    return path


def load_scene(path: str | Path) -> SceneConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read scene {path}: {exc}") from exc
    return scene_from_dict(raw)


def _quantize(v: float) -> int:
    return round(v / HASH_QUANTUM)


def scene_hash(scene: SceneConfig) -> str:
    """64-bit content digest (16 hex chars) of the scene configuration.

    Covers objects (order-independent for confounders), poses (quantized to
    1e-6), lighting, camera, task, and table size. Deliberately excludes
    scene_id and seed: two generator runs that land on the same physical
    configuration count as duplicates.
    """
    payload = {
        "table": [_quantize(v) for v in scene.table_half_extents],
        "objects": [
            [o.record_id, o.role.value, [_quantize(v) for v in _pose_to_list(o.pose)]]
            for o in _sorted_objects(scene)
        ],
        "lighting": _quantize(scene.lighting.intensity_scale),
        "camera": [
            [_quantize(v) for v in scene.camera.position],
            [_quantize(v) for v in scene.camera.orientation],
            _quantize(scene.camera.fov_deg),
            list(scene.camera.resolution),
        ],
        "task": [
            scene.task.kind.value,
            scene.task.instruction,
            scene.task.target_a_id,
            scene.task.target_b_id or "",
        ],
    }
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.blake2b(blob, digest_size=8).hexdigest()


def with_scene_id(scene: SceneConfig, scene_id: str) -> SceneConfig:
    return replace(scene, scene_id=scene_id)


# --------------------------------------------------------------------------
# Validation
# --------------------------------------------------------------------------


@dataclass
class ValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, msg: str) -> None:
        self.violations.append(msg)


def plane_distance(a: Pose, b: Pose) -> float:
    dx = a.position[0] - b.position[0]
    dy = a.position[1] - b.position[1]
    return math.hypot(dx, dy)


def validate_scene(
    scene: SceneConfig, db: ObjectDatabase, safe_dist: float
) -> ValidationReport:
    """Check every scene invariant; report all violations, raise nothing."""
    report = ValidationReport()
    hx, hy = scene.table_half_extents

    roles: dict[Role, list[str]] = {r: [] for r in Role}
    for obj in scene.objects:
        roles[obj.role].append(obj.record_id)
        if obj.record_id not in db:
            report.add(f"object {obj.record_id!r} not in database")
        x, y = obj.pose.position[0], obj.pose.position[1]
        if abs(x) > hx or abs(y) > hy:
            report.add(f"object {obj.record_id!r} at ({x:.3f}, {y:.3f}) outside table bounds")

    for role in (Role.TARGET_A, Role.TARGET_B):
        if len(roles[role]) > 1:
            report.add(f"multiple objects with role {role.value}: {roles[role]}")

    objs = list(scene.objects)
    for i in range(len(objs)):
        for j in range(i + 1, len(objs)):
            d = plane_distance(objs[i].pose, objs[j].pose)
            if d < safe_dist:
                report.add(
                    f"objects {objs[i].record_id!r} and {objs[j].record_id!r} "
                    f"are {d:.4f} m apart (< {safe_dist} m)"
                )

    task = scene.task
    if task.target_a_id not in roles[Role.TARGET_A]:
        report.add(f"task target_a {task.target_a_id!r} missing from scene (role target_a)")
    if task.kind.n_targets == 2:
        if task.target_b_id not in roles[Role.TARGET_B]:
            report.add(f"task target_b {task.target_b_id!r} missing from scene (role target_b)")
    elif roles[Role.TARGET_B]:
        report.add(f"{task.kind.value} scene must not contain a target_b object")

    return report


def default_table_half_extents() -> tuple[float, float]:
    return (0.40, 0.40)
