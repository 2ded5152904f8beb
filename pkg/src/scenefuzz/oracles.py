"""Task-success oracles evaluated frame by frame on simulator truth.

Each task decomposes into ordered sub-goals (grasp -> lift/move -> success)
and the tracker enforces that hierarchy by construction: a later flag can
only be set while every earlier one holds, so aggregated counts are always
monotone across steps.

Success thresholds: lift clearance 0.02 m held 5 consecutive frames (task
1), surface gap <= 0.05 m after release (task 2), a stable stack on the
reference object (task 3), volume fully inside the container cavity (task
4). Task 2 additionally requires the gripper to have released the object;
reports record that choice.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .geometry import cavity_contains_xy, footprint_contains, fully_inside_cavity, surface_gap
from .scene import ObjectDatabase, SceneConfig, TaskKind
from .sim import EVENT_CONFOUNDER_CONTACT, SUPPORT_ON, EpisodeConfig, WorldState

TERMINATION_SUCCESS = "task_success"
TERMINATION_MAX_STEPS = "max_steps"
TERMINATION_POLICY_ERROR = "policy_error"


@dataclass(frozen=True)
class EpisodeResult:
    scene_id: str
    task: TaskKind
    grasp_correct: bool
    mid_step: bool
    success: bool
    confounder_contacts: int
    frames_to_success: int | None
    termination: str

    def as_dict(self) -> dict[str, Any]:
        return {
            "scene_id": self.scene_id,
            "task": self.task.value,
            "grasp_correct": self.grasp_correct,
            "mid_step": self.mid_step,
            "success": self.success,
            "confounder_contacts": self.confounder_contacts,
            "frames_to_success": self.frames_to_success,
            "termination": self.termination,
        }

    @classmethod
    def from_dict(cls, raw: dict[str, Any]) -> "EpisodeResult":
        return cls(
            scene_id=raw["scene_id"],
            task=TaskKind(raw["task"]),
            grasp_correct=bool(raw["grasp_correct"]),
            mid_step=bool(raw["mid_step"]),
            success=bool(raw["success"]),
            confounder_contacts=int(raw["confounder_contacts"]),
            frames_to_success=raw.get("frames_to_success"),
            termination=raw["termination"],
        )


class OracleTracker:
    """Running per-frame evaluation of one episode's sub-goal predicates."""

    def __init__(self, scene: SceneConfig, db: ObjectDatabase, cfg: EpisodeConfig):
        self.scene = scene
        self.cfg = cfg
        self.kind = scene.task.kind
        self.a_id = scene.task.target_a_id
        self.b_id = scene.task.target_b_id
        self.rec_a = db.get(self.a_id)
        self.rec_b = db.get(self.b_id) if self.b_id else None
        self.grasp_correct = False
        self.mid_step = False
        self.success = False
        self.lift_streak = 0
        self.frames_to_success: int | None = None

    def update(self, state: WorldState) -> bool:
        """Fold in one frame; returns the current success flag."""
        a_pose = state.pose_of(self.a_id)
        attached_a = state.attached is not None and state.attached.key == self.a_id
        if attached_a:
            self.grasp_correct = True

        if self.kind is TaskKind.PICK_UP:
            bottom = a_pose.position[2] - self.rec_a.half_height
            if self.grasp_correct and attached_a and bottom >= self.cfg.lift_height:
                self.lift_streak += 1
                self.mid_step = True
            else:
                self.lift_streak = 0
            if self.mid_step and self.lift_streak >= self.cfg.lift_frames:
                self.success = True
        elif self.kind is TaskKind.MOVE_NEAR:
            b_pose = state.pose_of(self.b_id)
            gap = surface_gap(self.rec_a, a_pose, self.rec_b, b_pose)
            if self.grasp_correct and gap <= self.cfg.near_dist:
                self.mid_step = True
            self.success = (
                self.grasp_correct
                and self.mid_step
                and not attached_a
                and gap <= self.cfg.near_dist
            )
        elif self.kind is TaskKind.PUT_ON:
            b_pose = state.pose_of(self.b_id)
            a_xy = (a_pose.position[0], a_pose.position[1])
            if self.grasp_correct and attached_a and footprint_contains(self.rec_b, b_pose, a_xy):
                self.mid_step = True
            self.success = (
                self.grasp_correct
                and self.mid_step
                and not attached_a
                and state.supports.get(self.a_id) == (SUPPORT_ON, self.b_id)
            )
        else:  # PUT_IN
            b_pose = state.pose_of(self.b_id)
            a_xy = (a_pose.position[0], a_pose.position[1])
            if self.grasp_correct and attached_a and cavity_contains_xy(self.rec_b, b_pose, a_xy):
                self.mid_step = True
            self.success = (
                self.grasp_correct
                and self.mid_step
                and not attached_a
                and fully_inside_cavity(self.rec_a, a_pose, self.rec_b, b_pose)
            )

        if self.success and self.frames_to_success is None:
            self.frames_to_success = state.frame
        return self.success

    def result(self, state: WorldState, termination: str) -> EpisodeResult:
        contacts = sum(1 for e in state.events if e.kind == EVENT_CONFOUNDER_CONTACT)
        return EpisodeResult(
            scene_id=self.scene.scene_id,
            task=self.kind,
            grasp_correct=self.grasp_correct,
            mid_step=self.mid_step,
            success=self.success,
            confounder_contacts=contacts,
            frames_to_success=self.frames_to_success,
            termination=termination,
        )
