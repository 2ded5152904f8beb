"""Campaign orchestration: presets, execution, persistence, resume.

A campaign directory is self-describing and replayable:

    <out>/
      manifest.json                   campaign-level config echo
      suites/<task>[/n<k>]/           generated scenes + suite manifests
      <preset>/<task>/results.jsonl   one episode result per line

Episodes are keyed by (scene hash, repeat); interrupted campaigns resume
by skipping completed keys. Mutation draws are derived from (campaign
seed, scene hash, repeat) before dispatch, so results are independent of
worker count and schedule.
"""

from __future__ import annotations

import json
import random
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any

from .camera import frames_full_table
from .data import deny_list_for, default_paraphrases, seen_db, unseen_db
from .generate import (
    CAMERA_ATTEMPTS,
    CameraMutation,
    GenerationError,
    GeneratorConfig,
    LightingMutation,
    apply_camera_mutation,
    apply_lighting_mutation,
    derive_seed,
    generate_suite,
    load_suite,
    mutate_instruction,
    sample_camera_mutation,
    sample_lighting_factor,
    save_suite,
)
from .oracles import TERMINATION_POLICY_ERROR, EpisodeResult
from .policy import (
    PolicyConnection,
    PolicyDescriptor,
    PolicyError,
    Timeouts,
    parse_policy_descriptor,
)
from .protocol import PROTOCOL_VERSION
from .runner import TRACE_FILE_SUFFIX, run_episode
from .scene import ObjectDatabase, SceneConfig, TaskKind, load_object_db, scene_hash
from .sim import EpisodeConfig

PRESET_BASELINE = "baseline"
PRESET_CONFOUND = "confound_sweep"
PRESET_LIGHTING = "lighting"
PRESET_CAMERA = "camera"
PRESET_UNSEEN = "unseen"
PRESET_INSTRUCTION = "instruction"
PRESETS = (
    PRESET_BASELINE,
    PRESET_CONFOUND,
    PRESET_LIGHTING,
    PRESET_CAMERA,
    PRESET_UNSEEN,
    PRESET_INSTRUCTION,
)

ALL_TASKS = tuple(TaskKind)
CONFOUND_LEVELS = (0, 1, 2, 3, 4)


class CampaignError(RuntimeError):
    """Missing prerequisites or inconsistent campaign state."""


@dataclass(frozen=True)
class CampaignConfig:
    preset: str
    policy: str = "oracle"
    tasks: tuple[TaskKind, ...] = ALL_TASKS
    suite_size: int = 100
    repeats: int = 3  # mutation presets only; instruction uses 1
    seed: int = 0
    workers: int = 1
    db_path: str | None = None  # None: bundled pool chosen by preset
    source: str | None = None  # prior campaign dir for mutation presets
    cheat: bool | None = None
    max_steps: int = 120
    save_traces: bool = False

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise CampaignError(f"unknown preset {self.preset!r} (have {PRESETS})")
        if self.suite_size < 1 or self.repeats < 1 or self.workers < 1:
            raise CampaignError("suite_size, repeats, and workers must be >= 1")

    @property
    def is_mutation_preset(self) -> bool:
        return self.preset in (PRESET_LIGHTING, PRESET_CAMERA, PRESET_INSTRUCTION)

    def effective_repeats(self) -> int:
        if self.preset == PRESET_INSTRUCTION:
            return 1
        if self.preset in (PRESET_LIGHTING, PRESET_CAMERA):
            return self.repeats
        return 1


@dataclass
class Job:
    task: TaskKind
    scene: SceneConfig  # as executed (mutation already applied)
    base_hash: str  # hash of the unmutated scene (resume/replay key)
    repeat: int
    mutation: dict[str, Any] | None = None
    group: str = ""  # e.g. "n2" for the confounder sweep


@dataclass
class CampaignSummary:
    out_dir: Path
    episodes: int
    policy_errors: int
    skipped: int

    @property
    def ok(self) -> bool:
        return self.policy_errors == 0


def resolve_db(cfg: CampaignConfig) -> ObjectDatabase:
    if cfg.db_path:
        return load_object_db(cfg.db_path)
    return unseen_db() if cfg.preset == PRESET_UNSEEN else seen_db()


def _generator_config(cfg: CampaignConfig, task: TaskKind, n_confound) -> GeneratorConfig:
    return GeneratorConfig(
        seed=derive_seed(cfg.seed, cfg.preset, task.value, str(n_confound)),
        n_confound=n_confound,
    )


def draw_camera_mutation(base, rng: random.Random, table_half_extents=(0.40, 0.40)):
    """Sample a recordable camera mutation that keeps the table in frame."""
    for _ in range(CAMERA_ATTEMPTS):
        m = sample_camera_mutation(rng)
        cam = apply_camera_mutation(base, m)
        if frames_full_table(cam, table_half_extents):
            return cam, m
    raise GenerationError("camera mutation never kept the table in view")


def _mutated_job(
    cfg: CampaignConfig, scene: SceneConfig, base_hash: str, repeat: int, db: ObjectDatabase
) -> Job:
    rng = random.Random(derive_seed(cfg.seed, cfg.preset, base_hash, repeat))
    if cfg.preset == PRESET_LIGHTING:
        direction = rng.choice(("decrease", "increase"))
        factor = sample_lighting_factor(direction, rng)
        mutated = replace(
            scene, lighting=apply_lighting_mutation(scene.lighting, LightingMutation(factor))
        )
        record = {"kind": "lighting", "direction": direction, "factor": factor}
    elif cfg.preset == PRESET_CAMERA:
        cam, m = draw_camera_mutation(scene.camera, rng, scene.table_half_extents)
        mutated = replace(scene, camera=cam)
        record = {"kind": "camera", **m.as_dict()}
    elif cfg.preset == PRESET_INSTRUCTION:
        task = mutate_instruction(scene.task, default_paraphrases(), rng, db)
        mutated = replace(scene, task=task)
        record = {"kind": "instruction", "instruction": task.instruction}
    else:
        raise CampaignError(f"{cfg.preset} is not a mutation preset")
    return Job(
        task=scene.task.kind,
        scene=mutated,
        base_hash=base_hash,
        repeat=repeat,
        mutation=record,
    )


def _load_source_scenes(
    cfg: CampaignConfig, task: TaskKind, passed_only: bool
) -> list[tuple[str, SceneConfig]]:
    """(base hash, scene) pairs from a prior campaign's suites and results."""
    if not cfg.source:
        raise CampaignError(f"{cfg.preset} preset needs --source <prior campaign dir>")
    src = Path(cfg.source)
    results = _read_results(src, task)
    suite_dir = src / "suites" / task.value
    if not suite_dir.exists():
        raise CampaignError(f"source campaign has no suite for {task.value}: {suite_dir}")
    _, scenes = load_suite(suite_dir)
    by_hash = {scene_hash(s): s for s in scenes}
    wanted: list[tuple[str, SceneConfig]] = []
    seen: set[str] = set()
    for row in results:
        h = row["scene_hash"]
        if h in seen or h not in by_hash:
            continue
        if passed_only and not row["success"]:
            continue
        seen.add(h)
        wanted.append((h, by_hash[h]))
    return wanted


def build_jobs(cfg: CampaignConfig, db: ObjectDatabase, out_dir: Path) -> list[Job]:
    deny = deny_list_for(db)
    jobs: list[Job] = []
    if cfg.preset in (PRESET_BASELINE, PRESET_UNSEEN):
        for task in cfg.tasks:
            gen_cfg = _generator_config(cfg, task, (0, 3))
            scenes = generate_suite(db, task, gen_cfg, cfg.suite_size, deny)
            save_suite(scenes, out_dir / "suites" / task.value, task, gen_cfg)
            jobs.extend(
                Job(task=task, scene=s, base_hash=scene_hash(s), repeat=0) for s in scenes
            )
    elif cfg.preset == PRESET_CONFOUND:
        for task in cfg.tasks:
            for n in CONFOUND_LEVELS:
                gen_cfg = _generator_config(cfg, task, n)
                scenes = generate_suite(db, task, gen_cfg, cfg.suite_size, deny)
                save_suite(scenes, out_dir / "suites" / task.value / f"n{n}", task, gen_cfg)
                jobs.extend(
                    Job(task=task, scene=s, base_hash=scene_hash(s), repeat=0, group=f"n{n}")
                    for s in scenes
                )
    else:
        passed_only = cfg.preset in (PRESET_LIGHTING, PRESET_CAMERA)
        for task in cfg.tasks:
            for base_hash, scene in _load_source_scenes(cfg, task, passed_only):
                for r in range(cfg.effective_repeats()):
                    jobs.append(_mutated_job(cfg, scene, base_hash, r, db))
    return jobs


# --------------------------------------------------------------------------
# Execution
# --------------------------------------------------------------------------


def _results_path(out_dir: Path, preset: str, task: TaskKind) -> Path:
    return out_dir / preset / task.value / "results.jsonl"


def _read_results(campaign_dir: Path, task: TaskKind) -> list[dict[str, Any]]:
    rows: list[dict[str, Any]] = []
    for preset in PRESETS:
        path = _results_path(campaign_dir, preset, task)
        if path.exists():
            with path.open() as f:
                rows.extend(json.loads(line) for line in f if line.strip())
    return rows


def _row_from(job: Job, result: EpisodeResult, cfg: CampaignConfig) -> dict[str, Any]:
    return {
        "task": job.task.value,
        "policy": cfg.policy,
        "scene_id": job.scene.scene_id,
        "scene_hash": job.base_hash,
        "variant_hash": scene_hash(job.scene),
        "repeat": job.repeat,
        "group": job.group,
        "mutation": job.mutation,
        "episode_seed": job.scene.seed,
        "protocol_version": PROTOCOL_VERSION,
        **result.as_dict(),
    }


def _row_key(row: dict[str, Any]) -> tuple:
    return (row["task"], row["scene_hash"], row["repeat"])


class _WorkerPool:
    """Thread pool where each worker owns one policy connection."""

    def __init__(self, descriptor: PolicyDescriptor, workers: int, timeouts: Timeouts | None = None):
        self.descriptor = descriptor
        self.workers = workers
        self.timeouts = timeouts
        self.local = threading.local()
        self.connections: list[PolicyConnection] = []
        self.lock = threading.Lock()

    def connection(self) -> PolicyConnection:
        conn = getattr(self.local, "conn", None)
        if conn is None:
            conn = PolicyConnection(self.descriptor, timeouts=self.timeouts)
            self.local.conn = conn
            with self.lock:
                self.connections.append(conn)
        return conn

    def close(self) -> None:
        for conn in self.connections:
            conn.close()


def run_campaign(
    cfg: CampaignConfig, out_dir: str | Path, timeouts: Timeouts | None = None
) -> CampaignSummary:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    db = resolve_db(cfg)
    descriptor = parse_policy_descriptor(cfg.policy, cheat=cfg.cheat)
    ep_cfg = EpisodeConfig(max_steps=cfg.max_steps)

    manifest = {
        "preset": cfg.preset,
        "policy": cfg.policy,
        "tasks": [t.value for t in cfg.tasks],
        "suite_size": cfg.suite_size,
        "repeats": cfg.effective_repeats(),
        "seed": cfg.seed,
        "db": cfg.db_path or ("unseen" if cfg.preset == PRESET_UNSEEN else "seen"),
        "source": cfg.source,
        "protocol_version": PROTOCOL_VERSION,
        "max_steps": cfg.max_steps,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")

    jobs = build_jobs(cfg, db, out)
    if not jobs:
        print(f"warning: {cfg.preset} campaign has no episodes to run (empty input)")

    # Resume: drop jobs whose (task, base hash, repeat) already have a row.
    existing: dict[TaskKind, list[dict[str, Any]]] = {}
    done_keys: set[tuple] = set()
    for task in cfg.tasks:
        path = _results_path(out, cfg.preset, task)
        rows = []
        if path.exists():
            with path.open() as f:
                rows = [json.loads(line) for line in f if line.strip()]
        existing[task] = rows
        done_keys.update(_row_key(r) for r in rows)
    pending = [j for j in jobs if (j.task.value, j.base_hash, j.repeat) not in done_keys]
    skipped = len(jobs) - len(pending)

    pool = _WorkerPool(descriptor, cfg.workers, timeouts)
    trace_dir = out / "traces"
    if cfg.save_traces:
        trace_dir.mkdir(exist_ok=True)

    def run_one(job: Job) -> dict[str, Any]:
        try:
            conn = pool.connection()
        except PolicyError:
            # unreachable policy: record the episode, never abort the campaign
            result = EpisodeResult(
                scene_id=job.scene.scene_id,
                task=job.task,
                grasp_correct=False,
                mid_step=False,
                success=False,
                confounder_contacts=0,
                frames_to_success=None,
                termination=TERMINATION_POLICY_ERROR,
            )
            return _row_from(job, result, cfg)
        trace, result = run_episode(job.scene, db, conn, ep_cfg)
        if cfg.save_traces:
            trace.save(trace_dir / f"{job.scene.scene_id}.r{job.repeat}{TRACE_FILE_SUFFIX}")
        return _row_from(job, result, cfg)

    new_rows: list[dict[str, Any]]
    try:
        if cfg.workers == 1:
            new_rows = [run_one(j) for j in pending]
        else:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool_exec:
                new_rows = list(pool_exec.map(run_one, pending))
    finally:
        pool.close()

    by_task: dict[TaskKind, list[dict[str, Any]]] = {t: list(existing[t]) for t in cfg.tasks}
    for row in new_rows:
        by_task[TaskKind(row["task"])].append(row)

    errors = 0
    episodes = 0
    for task in cfg.tasks:
        rows = sorted(by_task[task], key=_row_key)
        episodes += len(rows)
        errors += sum(1 for r in rows if r["termination"] == TERMINATION_POLICY_ERROR)
        path = _results_path(out, cfg.preset, task)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w") as f:
            for row in rows:
                f.write(json.dumps(row, sort_keys=True, separators=(",", ":")) + "\n")

    return CampaignSummary(out_dir=out, episodes=episodes, policy_errors=errors, skipped=skipped)


# --------------------------------------------------------------------------
# Replay
# --------------------------------------------------------------------------


def find_scene(campaign_dir: str | Path, digest: str) -> tuple[SceneConfig, dict[str, Any] | None]:
    """Locate a scene by its (base) hash; returns the scene and its result row."""
    campaign_dir = Path(campaign_dir)
    scene = None
    for manifest_path in sorted(campaign_dir.glob("suites/**/manifest.json")):
        manifest = json.loads(manifest_path.read_text())
        for entry in manifest["scenes"]:
            if entry["hash"] == digest:
                from .scene import load_scene

                scene = load_scene(manifest_path.parent / entry["file"])
                break
        if scene is not None:
            break
    if scene is None:
        raise CampaignError(f"scene hash {digest} not found under {campaign_dir}/suites")
    for task in TaskKind:
        for r in _read_results(campaign_dir, task):
            if r["scene_hash"] == digest:
                return scene, r
    return scene, None


def apply_recorded_mutation(scene: SceneConfig, record: dict[str, Any] | None) -> SceneConfig:
    if not record:
        return scene
    kind = record["kind"]
    if kind == "lighting":
        return replace(
            scene,
            lighting=apply_lighting_mutation(scene.lighting, LightingMutation(record["factor"])),
        )
    if kind == "camera":
        m = CameraMutation(
            rot_deltas=tuple(record["rot_deltas"]),
            direction=tuple(record["direction"]),
            distance=record["distance"],
        )
        return replace(scene, camera=apply_camera_mutation(scene.camera, m))
    if kind == "instruction":
        return replace(scene, task=replace(scene.task, instruction=record["instruction"]))
    raise CampaignError(f"unknown mutation record kind {kind!r}")


def replay_scene(
    campaign_dir: str | Path,
    digest: str,
    policy: str,
    cheat: bool | None = None,
    max_steps: int = 120,
    timeouts: Timeouts | None = None,
):
    """Re-run one recorded episode; returns (trace, result, original row)."""
    scene, row = find_scene(campaign_dir, digest)
    if row is not None:
        scene = apply_recorded_mutation(scene, row.get("mutation"))
    which = "seen"
    manifest_path = Path(campaign_dir) / "manifest.json"
    if manifest_path.exists():
        which = json.loads(manifest_path.read_text()).get("db", "seen")
    if which == "seen":
        db = seen_db()
    elif which == "unseen":
        db = unseen_db()
    else:
        db = load_object_db(which)
    conn = PolicyConnection(parse_policy_descriptor(policy, cheat=cheat), timeouts=timeouts)
    try:
        trace, result = run_episode(scene, db, conn, EpisodeConfig(max_steps=max_steps))
    finally:
        conn.close()
    return trace, result, row
