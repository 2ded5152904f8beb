"""Closed-loop episode execution: observe -> act -> step -> evaluate.

The loop terminates on oracle success, on the step budget, or on any
policy failure (transport loss, timeout, malformed action), which is
recorded as a policy_error result with the partial trace kept.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .oracles import (
    TERMINATION_MAX_STEPS,
    TERMINATION_POLICY_ERROR,
    TERMINATION_SUCCESS,
    EpisodeResult,
    OracleTracker,
)
from .policy import PolicyConnection, PolicyError
from .render import privileged_block, render_rgb, with_privileged
from .scene import ObjectDatabase, Pose, SceneConfig, scene_hash
from .sim import ActionCommand, EpisodeConfig, InvalidActionError, WorldState, init_world, step

TRACE_FILE_SUFFIX = ".trace.jsonl"


@dataclass(frozen=True)
class FrameSnapshot:
    frame: int
    ee_pose: Pose
    aperture: float
    attached: str | None
    object_poses: dict[str, Pose]
    events: list[list[Any]]

    def as_dict(self) -> dict[str, Any]:
        return {
            "frame": self.frame,
            "ee_pose": [*self.ee_pose.position, *self.ee_pose.orientation],
            "aperture": self.aperture,
            "attached": self.attached,
            "object_poses": {
                k: [*p.position, *p.orientation] for k, p in sorted(self.object_poses.items())
            },
            "events": self.events,
        }


@dataclass
class EpisodeTrace:
    scene_id: str
    scene_digest: str
    max_steps: int
    frames: list[FrameSnapshot]
    termination: str = ""

    def header(self) -> dict[str, Any]:
        return {
            "scene_id": self.scene_id,
            "scene_hash": self.scene_digest,
            "max_steps": self.max_steps,
            "termination": self.termination,
        }

    def to_jsonl(self) -> str:
        lines = [json.dumps(self.header(), sort_keys=True, separators=(",", ":"))]
        lines.extend(
            json.dumps(f.as_dict(), sort_keys=True, separators=(",", ":"))
            for f in self.frames
        )
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.blake2b(self.to_jsonl().encode(), digest_size=16).hexdigest()

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(self.to_jsonl())
        return path


def _snapshot(state: WorldState, prev_event_count: int) -> FrameSnapshot:
    new_events = [e.as_list() for e in state.events[prev_event_count:]]
    return FrameSnapshot(
        frame=state.frame,
        ee_pose=state.ee_pose,
        aperture=state.aperture,
        attached=state.attached.key if state.attached else None,
        object_poses=dict(state.object_poses),
        events=new_events,
    )


def run_episode(
    scene: SceneConfig,
    db: ObjectDatabase,
    connection: PolicyConnection,
    cfg: EpisodeConfig | None = None,
) -> tuple[EpisodeTrace, EpisodeResult]:
    """Run one full episode of ``scene`` against a connected policy."""
    cfg = cfg or EpisodeConfig()
    state = init_world(scene, db, cfg)
    tracker = OracleTracker(scene, db, cfg)
    confounders = frozenset(o.record_id for o in scene.confounders)
    trace = EpisodeTrace(
        scene_id=scene.scene_id,
        scene_digest=scene_hash(scene),
        max_steps=cfg.max_steps,
        frames=[_snapshot(state, 0)],
    )

    termination = TERMINATION_MAX_STEPS
    try:
        handle = connection.start_episode(
            instruction=scene.task.instruction,
            width=scene.camera.resolution[0],
            height=scene.camera.resolution[1],
            max_steps=cfg.max_steps,
            scene_id=scene.scene_id,
        )
    except PolicyError:
        trace.termination = TERMINATION_POLICY_ERROR
        return trace, tracker.result(state, TERMINATION_POLICY_ERROR)

    for _ in range(cfg.max_steps):
        obs = render_rgb(state, scene, db)
        if handle.cheat_mode:
            obs = with_privileged(obs, privileged_block(state, scene, db))
        try:
            action: ActionCommand = connection.query_action(handle, obs)
            prev_events = len(state.events)
            state = step(state, action, cfg, db, confounder_keys=confounders)
        except (PolicyError, InvalidActionError):
            termination = TERMINATION_POLICY_ERROR
            break
        trace.frames.append(_snapshot(state, prev_events))
        if tracker.update(state):
            termination = TERMINATION_SUCCESS
            break

    trace.termination = termination
    connection.finish_episode(termination)
    return trace, tracker.result(state, termination)
