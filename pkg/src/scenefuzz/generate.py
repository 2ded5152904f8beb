"""Scene generation and mutation operators.

Generation samples semantically valid targets and confounders without
replacement from an object database, places them with a minimum pairwise
spacing, and optionally perturbs lighting, camera, and task instruction.
All randomness flows through an explicit ``random.Random`` so suites are a
pure function of (database, config, task, count, seed).
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Iterable, Sequence

from .camera import default_camera, frames_full_table
from .scene import (
    MAX_INTENSITY,
    SCENE_FILE_SUFFIX,
    MIN_INTENSITY,
    STANDARD_TEMPLATES,
    CameraConfig,
    LightingConfig,
    ObjectDatabase,
    ObjectInstance,
    Pose,
    Role,
    SceneConfig,
    SceneError,
    TaskInstance,
    TaskKind,
    plane_distance,
    render_instruction,
    scene_hash,
    scene_to_json,
    validate_scene,
    with_scene_id,
)

DEFAULT_SAFE_DIST = 0.15
POSE_ATTEMPTS = 1000
CAMERA_ATTEMPTS = 100
SUITE_ATTEMPT_FACTOR = 10

CAMERA_ROT_MAX_DEG = 5.0
CAMERA_TRANS_MAX_M = 0.05


class GenerationError(RuntimeError):
    """Sampling could not satisfy the constraints within its attempt budget."""


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs for scene generation.

    ``n_confound`` is either a fixed count or an inclusive (lo, hi) range
    drawn per scene. ``n_target`` defaults to what the task kind requires.
    """

    seed: int = 0
    n_target: int | None = None
    n_confound: int | tuple[int, int] = 0
    safe_dist: float = DEFAULT_SAFE_DIST
    lighting_flag: bool = False
    camera_flag: bool = False
    lighting_range: tuple[tuple[float, float], tuple[float, float]] = (
        (MIN_INTENSITY, 1.0),
        (1.0, MAX_INTENSITY),
    )
    camera_rot_max_deg: float = CAMERA_ROT_MAX_DEG
    camera_trans_max_m: float = CAMERA_TRANS_MAX_M
    table_half_extents: tuple[float, float] = (0.40, 0.40)

    def __post_init__(self) -> None:
        if self.safe_dist <= 0:
            raise SceneError("safe_dist must be positive")
        if self.max_confound < 0:
            raise SceneError("n_confound must be non-negative")

    @property
    def max_confound(self) -> int:
        if isinstance(self.n_confound, tuple):
            return self.n_confound[1]
        return self.n_confound

    def draw_confound(self, rng: random.Random) -> int:
        if isinstance(self.n_confound, tuple):
            lo, hi = self.n_confound
            return rng.randint(lo, hi)
        return self.n_confound

    def targets_for(self, kind: TaskKind) -> int:
        return self.n_target if self.n_target is not None else kind.n_targets


# --------------------------------------------------------------------------
# Semantic validity
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class DenyList:
    """Per-task (role, record_id) pairs that make a target selection invalid."""

    entries: dict[TaskKind, frozenset[tuple[Role, str]]]

    @classmethod
    def empty(cls) -> "DenyList":
        return cls(entries={})

    def denies(self, kind: TaskKind, role: Role, record_id: str) -> bool:
        return (role, record_id) in self.entries.get(kind, frozenset())


def load_deny_list(path: str | Path, db: ObjectDatabase | None = None) -> DenyList:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read deny list {path}: {exc}") from exc
    entries: dict[TaskKind, frozenset[tuple[Role, str]]] = {}
    for key, items in raw.items():
        kind = TaskKind(key)
        pairs = set()
        for item in items:
            role = Role(item["role"])
            rid = item["record_id"]
            if db is not None and rid not in db:
                raise SceneError(f"deny list {path} references unknown id {rid!r}")
            pairs.add((role, rid))
        entries[kind] = frozenset(pairs)
    return DenyList(entries=entries)


def semantic_valid(
    targets: Sequence[ObjectInstance], task_kind: TaskKind, deny: DenyList
) -> bool:
    """Deny-list check; single-step tasks (pick_up, move_near) never fail it."""
    if task_kind in (TaskKind.PICK_UP, TaskKind.MOVE_NEAR):
        return True
    return not any(deny.denies(task_kind, t.role, t.record_id) for t in targets)


# --------------------------------------------------------------------------
# Instruction templating
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class ParaphraseSet:
    templates: dict[TaskKind, tuple[str, ...]]

    def for_kind(self, kind: TaskKind) -> tuple[str, ...]:
        got = self.templates.get(kind, ())
        if not got:
            raise SceneError(f"no instruction templates for task {kind.value}")
        return got


def load_paraphrases(path: str | Path) -> ParaphraseSet:
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise SceneError(f"cannot read paraphrase set {path}: {exc}") from exc
    templates: dict[TaskKind, tuple[str, ...]] = {}
    for key, items in raw.items():
        kind = TaskKind(key)
        need = kind.n_targets
        for tpl in items:
            n = tpl.count("[object name]")
            if need == 1 and n != 1:
                raise SceneError(f"{kind.value} template needs 1 placeholder: {tpl!r}")
            if need == 2 and n < 2:
                raise SceneError(f"{kind.value} template needs >= 2 placeholders: {tpl!r}")
        templates[kind] = tuple(items)
    return ParaphraseSet(templates=templates)


def standard_instruction(kind: TaskKind, db: ObjectDatabase, a_id: str, b_id: str | None) -> str:
    name_a = db.get(a_id).display_name
    name_b = db.get(b_id).display_name if b_id else None
    return render_instruction(STANDARD_TEMPLATES[kind], name_a, name_b)


def mutate_instruction(
    task: TaskInstance, paraphrases: ParaphraseSet, rng: random.Random, db: ObjectDatabase
) -> TaskInstance:
    """Re-render the instruction from a uniformly chosen template; ids unchanged."""
    template = rng.choice(paraphrases.for_kind(task.kind))
    name_a = db.get(task.target_a_id).display_name
    name_b = db.get(task.target_b_id).display_name if task.target_b_id else None
    return replace(task, instruction=render_instruction(template, name_a, name_b))


# --------------------------------------------------------------------------
# Pose sampling
# --------------------------------------------------------------------------


def pose_sampler(
    existing: Iterable[ObjectInstance],
    safe_dist: float,
    table_half_extents: tuple[float, float],
    rng: random.Random,
    half_height: float,
) -> Pose:
    """Uniform in-bounds (x, y) and yaw, resting on the table (z = half height).

    Rejection-samples until the center is at least ``safe_dist`` (in the table
    plane) from every already-placed instance.
    """
    hx, hy = table_half_extents
    placed = list(existing)
    for _ in range(POSE_ATTEMPTS):
        x = rng.uniform(-hx, hx)
        y = rng.uniform(-hy, hy)
        yaw = rng.uniform(-math.pi, math.pi)
        pose = Pose(position=(x, y, half_height), orientation=(0.0, 0.0, yaw))
        if all(plane_distance(pose, p.pose) >= safe_dist for p in placed):
            return pose
    raise GenerationError(
        f"no pose satisfying safe_dist={safe_dist} after {POSE_ATTEMPTS} attempts "
        f"({len(placed)} objects already placed)"
    )


# --------------------------------------------------------------------------
# Lighting and camera mutation
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class LightingMutation:
    factor: float

    def as_dict(self) -> dict[str, float]:
        return {"factor": self.factor}


def sample_lighting_factor(
    direction: str, rng: random.Random, cfg: GeneratorConfig | None = None
) -> float:
    """Draw the intensity factor: [1/20, 1) for decrease, (1, 20] for increase."""
    lo_rng, hi_rng = (cfg or GeneratorConfig()).lighting_range
    if direction == "increase":
        lo, hi = hi_rng
        while True:
            a = rng.uniform(lo, hi)
            if lo < a <= hi:
                return a
            if lo == hi:  # degenerate interval: identity allowed
                return lo
    elif direction == "decrease":
        lo, hi = lo_rng
        while True:
            a = rng.uniform(lo, hi)
            if lo <= a < hi:
                return a
            if lo == hi:
                return lo
    else:
        raise SceneError(f"unknown lighting direction {direction!r}")


def apply_lighting_mutation(base: LightingConfig, mutation: LightingMutation) -> LightingConfig:
    # Factors multiply the *default* intensity, not the current one, so
    # repeated mutations of the same scene stay in the configured range.
    del base
    return LightingConfig(intensity_scale=mutation.factor * 1.0)


def mutate_lighting(
    base: LightingConfig, direction: str, rng: random.Random, cfg: GeneratorConfig | None = None
) -> LightingConfig:
    return apply_lighting_mutation(
        base, LightingMutation(factor=sample_lighting_factor(direction, rng, cfg))
    )


@dataclass(frozen=True)
class CameraMutation:
    rot_deltas: tuple[float, float, float]  # radians, per rpy axis
    direction: tuple[float, float, float]  # unit translation direction
    distance: float

    def as_dict(self) -> dict[str, Any]:
        return {
            "rot_deltas": list(self.rot_deltas),
            "direction": list(self.direction),
            "distance": self.distance,
        }


def sample_camera_mutation(rng: random.Random, cfg: GeneratorConfig | None = None) -> CameraMutation:
    cfg = cfg or GeneratorConfig()
    max_rot = math.radians(cfg.camera_rot_max_deg)
    rot = (
        rng.uniform(-max_rot, max_rot),
        rng.uniform(-max_rot, max_rot),
        rng.uniform(-max_rot, max_rot),
    )
    while True:
        d = (rng.gauss(0.0, 1.0), rng.gauss(0.0, 1.0), rng.gauss(0.0, 1.0))
        n = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
        if n > 1e-9:
            break
    dist = rng.uniform(0.0, cfg.camera_trans_max_m)
    return CameraMutation(
        rot_deltas=rot, direction=(d[0] / n, d[1] / n, d[2] / n), distance=dist
    )


def apply_camera_mutation(base: CameraConfig, mutation: CameraMutation) -> CameraConfig:
    pos = tuple(
        p + mutation.distance * dv for p, dv in zip(base.position, mutation.direction)
    )
    ori = tuple(o + dr for o, dr in zip(base.orientation, mutation.rot_deltas))
    return CameraConfig(
        position=pos, orientation=ori, fov_deg=base.fov_deg, resolution=base.resolution
    )


def mutate_camera(
    base: CameraConfig,
    rng: random.Random,
    cfg: GeneratorConfig | None = None,
    table_half_extents: tuple[float, float] = (0.40, 0.40),
) -> CameraConfig:
    """Perturb orientation (per-axis) and position (random direction).

    Redraws until the whole table stays in view; errors out if the default
    framing is too tight for that to ever hold.
    """
    for _ in range(CAMERA_ATTEMPTS):
        cam = apply_camera_mutation(base, sample_camera_mutation(rng, cfg))
        if frames_full_table(cam, table_half_extents):
            return cam
    raise GenerationError(
        f"no camera mutation kept the table in view after {CAMERA_ATTEMPTS} attempts"
    )


# --------------------------------------------------------------------------
# Scene generation (targets -> confounders -> lighting -> camera)
# --------------------------------------------------------------------------

_TARGET_ROLES = (Role.TARGET_A, Role.TARGET_B)


def generate_scene(
    db: ObjectDatabase,
    task_kind: TaskKind,
    cfg: GeneratorConfig,
    rng: random.Random,
    deny: DenyList | None = None,
    seed: int | None = None,
) -> SceneConfig:
    """Generate one valid scene; raises GenerationError on sampler exhaustion.

    ``seed`` only annotates the scene (for replay bookkeeping); the caller is
    responsible for constructing ``rng`` from it.
    """
    deny = deny or DenyList.empty()
    n_target = cfg.targets_for(task_kind)
    n_confound = cfg.draw_confound(rng)
    if n_target + n_confound > len(db):
        raise GenerationError(
            f"database of {len(db)} records cannot host {n_target} targets "
            f"+ {n_confound} confounders"
        )

    deck = db.ids()
    rng.shuffle(deck)

    targets: list[ObjectInstance] = []
    while True:
        if len(deck) < n_target:
            raise GenerationError(
                f"object deck exhausted before a semantically valid "
                f"{task_kind.value} target selection was found"
            )
        candidate: list[ObjectInstance] = []
        for i in range(n_target):
            rec = db.get(deck.pop())
            pose = pose_sampler(
                candidate, cfg.safe_dist, cfg.table_half_extents, rng, rec.half_height
            )
            candidate.append(
                ObjectInstance(record_id=rec.id, pose=pose, role=_TARGET_ROLES[i])
            )
        if semantic_valid(candidate, task_kind, deny):
            targets = candidate
            break

    confounders: list[ObjectInstance] = []
    for _ in range(n_confound):
        if not deck:
            raise GenerationError(
                f"object deck exhausted while drawing {n_confound} confounders"
            )
        rec = db.get(deck.pop())
        pose = pose_sampler(
            targets + confounders, cfg.safe_dist, cfg.table_half_extents, rng, rec.half_height
        )
        confounders.append(ObjectInstance(record_id=rec.id, pose=pose, role=Role.CONFOUND))

    lighting = LightingConfig()
    if cfg.lighting_flag:
        direction = rng.choice(("decrease", "increase"))
        lighting = mutate_lighting(lighting, direction, rng, cfg)

    camera = default_camera()
    if cfg.camera_flag:
        camera = mutate_camera(camera, rng, cfg, cfg.table_half_extents)

    a_id = targets[0].record_id
    b_id = targets[1].record_id if n_target > 1 else None
    task = TaskInstance(
        kind=task_kind,
        instruction=standard_instruction(task_kind, db, a_id, b_id),
        target_a_id=a_id,
        target_b_id=b_id,
    )
    scene = SceneConfig(
        scene_id="",
        seed=seed if seed is not None else 0,
        objects=tuple(targets + confounders),
        lighting=lighting,
        camera=camera,
        task=task,
        table_half_extents=cfg.table_half_extents,
    )
    scene = with_scene_id(scene, f"{task_kind.value}-{scene_hash(scene)}")

    report = validate_scene(scene, db, cfg.safe_dist)
    if not report.ok:  # generator bug, not caller input
        raise GenerationError(f"generated scene fails validation: {report.violations}")
    return scene


def derive_seed(root_seed: int, *parts: int | str) -> int:
    """Stable 64-bit child seed from a root seed and arbitrary labels."""
    h = hashlib.blake2b(digest_size=8)
    h.update(str(root_seed).encode())
    for p in parts:
        h.update(b"/")
        h.update(str(p).encode())
    return int.from_bytes(h.digest(), "big")


def generate_suite(
    db: ObjectDatabase,
    task_kind: TaskKind,
    cfg: GeneratorConfig,
    count: int,
    deny: DenyList | None = None,
) -> list[SceneConfig]:
    """Generate ``count`` scenes with pairwise distinct configuration hashes.

    Per-scene seeds derive from (cfg.seed, attempt index); duplicates and
    sampler failures consume an attempt and move on, so the result is a pure
    function of the inputs.
    """
    if count < 1:
        raise SceneError("count must be >= 1")
    scenes: list[SceneConfig] = []
    seen_hashes: set[str] = set()
    budget = SUITE_ATTEMPT_FACTOR * count
    for attempt in range(budget):
        if len(scenes) == count:
            break
        scene_seed = derive_seed(cfg.seed, task_kind.value, attempt)
        rng = random.Random(scene_seed)
        try:
            scene = generate_scene(db, task_kind, cfg, rng, deny, seed=scene_seed)
        except GenerationError:
            continue
        digest = scene_hash(scene)
        if digest in seen_hashes:
            continue
        seen_hashes.add(digest)
        scenes.append(scene)
    if len(scenes) < count:
        raise GenerationError(
            f"only {len(scenes)}/{count} distinct scenes after {budget} attempts"
        )
    return scenes


# --------------------------------------------------------------------------
# Suite persistence
# --------------------------------------------------------------------------


def _cfg_to_dict(cfg: GeneratorConfig) -> dict[str, Any]:
    return {
        "seed": cfg.seed,
        "n_target": cfg.n_target,
        "n_confound": list(cfg.n_confound)
        if isinstance(cfg.n_confound, tuple)
        else cfg.n_confound,
        "safe_dist": cfg.safe_dist,
        "lighting_flag": cfg.lighting_flag,
        "camera_flag": cfg.camera_flag,
        "camera_rot_max_deg": cfg.camera_rot_max_deg,
        "camera_trans_max_m": cfg.camera_trans_max_m,
        "table_half_extents": list(cfg.table_half_extents),
    }


def save_suite(
    scenes: Sequence[SceneConfig],
    out_dir: str | Path,
    task_kind: TaskKind,
    cfg: GeneratorConfig,
) -> Path:
    """Write scenes plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for scene in scenes:
        digest = scene_hash(scene)
        fname = f"{scene.scene_id}{SCENE_FILE_SUFFIX}"
        (out / fname).write_text(scene_to_json(scene))
        a = scene.target_a
        entries.append(
            {
                "scene_id": scene.scene_id,
                "hash": digest,
                "file": fname,
                "seed": scene.seed,
                "target_a_xy": [a.pose.position[0], a.pose.position[1]],
            }
        )
    manifest = {
        "task": task_kind.value,
        "suite_seed": cfg.seed,
        "count": len(scenes),
        "config": _cfg_to_dict(cfg),
        "scenes": entries,
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def load_suite(suite_dir: str | Path) -> tuple[dict[str, Any], list[SceneConfig]]:
    from .scene import load_scene

    suite_dir = Path(suite_dir)
    manifest = json.loads((suite_dir / "manifest.json").read_text())
    scenes = [load_scene(suite_dir / entry["file"]) for entry in manifest["scenes"]]
    return manifest, scenes
