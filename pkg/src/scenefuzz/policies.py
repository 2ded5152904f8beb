"""Built-in scripted policies.

These drive the simulator through the same message path as external
policies: everything they know arrives via init and observe messages.
The oracle policy is a ground-truth solver (requires privileged
observations) used to validate oracles end to end; greedy and random are
deliberate failure generators for exercising the metrics.
"""

from __future__ import annotations

import math
import random
from typing import Any

from .generate import derive_seed

CRUISE_Z = 0.32
STEP_NORM = 0.09  # slightly under the simulator clamp so moves apply exactly
ARRIVE_TOL = 1e-6
GRASP_HOVER = 0.02  # ee height above the target top face when closing
PLACE_GAP = 0.02  # desired surface gap for move_near


class PolicyProgram:
    """One hosted policy: handshake data in, 7-number actions out."""

    name = "base"
    accepts_privileged = False

    def begin(self, init: dict[str, Any]) -> None:
        self.init = init

    def act(self, observe: dict[str, Any]) -> list[float]:
        raise NotImplementedError

    def finish(self, reason: str) -> None:
        pass


class EchoPolicy(PolicyProgram):
    """Null policy: acknowledges everything, never moves."""

    name = "echo"

    def act(self, observe: dict[str, Any]) -> list[float]:
        return [0.0] * 7


class RandomPolicy(PolicyProgram):
    """Uniform deltas within the simulator's per-step clamps.

    Reseeded per episode from (base seed, scene_id) so action streams do not
    depend on episode order.
    """

    name = "random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    def begin(self, init: dict[str, Any]) -> None:
        super().begin(init)
        self.rng = random.Random(derive_seed(self.seed, init.get("scene_id", "")))

    def act(self, observe: dict[str, Any]) -> list[float]:
        r = self.rng
        return [
            r.uniform(-0.10, 0.10),
            r.uniform(-0.10, 0.10),
            r.uniform(-0.10, 0.10),
            r.uniform(-0.20, 0.20),
            r.uniform(-0.20, 0.20),
            r.uniform(-0.20, 0.20),
            r.uniform(-1.0, 1.0),
        ]


def _move_toward(cur: list[float], goal: tuple[float, float, float]) -> list[float]:
    d = [goal[0] - cur[0], goal[1] - cur[1], goal[2] - cur[2]]
    n = math.sqrt(d[0] ** 2 + d[1] ** 2 + d[2] ** 2)
    if n <= STEP_NORM:
        return d
    s = STEP_NORM / n
    return [d[0] * s, d[1] * s, d[2] * s]


def _arrived(cur: list[float], goal: tuple[float, float, float]) -> bool:
    return math.dist(cur, goal) <= ARRIVE_TOL


def _world_half_extents_xy(obj: dict[str, Any]) -> tuple[float, float]:
    """Axis-aligned half extents of the (yawed) footprint."""
    hx, hy, _ = obj["half_extents"]
    if obj["shape"] == "cylinder":
        return hx, hy
    yaw = obj["orientation"][2]
    c, s = abs(math.cos(yaw)), abs(math.sin(yaw))
    return hx * c + hy * s, hx * s + hy * c


class ScriptedPickerBase(PolicyProgram):
    """Phase-scripted approach/grasp controller over privileged observations."""

    accepts_privileged = True

    def begin(self, init: dict[str, Any]) -> None:
        super().begin(init)
        self.phase = "approach"
        self.pick_key: str | None = None
        self.place_goal: tuple[float, float] | None = None

    def select_target(self, priv: dict[str, Any]) -> str:
        raise NotImplementedError

    def placement(self, priv: dict[str, Any]) -> tuple[float, float] | None:
        """XY goal for the carried object's center; None for pick-up style tasks."""
        return None

    def lower_bottom_z(self, priv: dict[str, Any]) -> float:
        """Target height of the carried object's bottom face before release."""
        return 0.002

    def act(self, observe: dict[str, Any]) -> list[float]:
        priv = observe.get("privileged")
        if priv is None:
            return [0.0] * 7
        ee = list(priv["ee_position"])
        attached = priv["attached"]
        if self.pick_key is None:
            self.pick_key = self.select_target(priv)
        target = priv["objects"][self.pick_key]
        tx, ty, tz = target["position"]
        t_top = tz + target["half_extents"][2]

        def hold() -> list[float]:
            return [0.0] * 7

        def move(goal: tuple[float, float, float]) -> list[float]:
            return [*_move_toward(ee, goal), 0.0, 0.0, 0.0, 0.0]

        if self.phase == "approach":
            goal = (tx, ty, CRUISE_Z)
            if _arrived(ee, goal):
                self.phase = "descend"
            else:
                return move(goal)
        if self.phase == "descend":
            goal = (tx, ty, t_top + GRASP_HOVER)
            if _arrived(ee, goal):
                self.phase = "close"
            else:
                return move(goal)
        if self.phase == "close":
            self.phase = "post_grasp"
            return [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -1.0]
        if self.phase == "post_grasp":
            if attached != self.pick_key:
                self.phase = "approach"  # missed; line up again
                return hold()
            self.place_goal = self.placement(priv)
            self.phase = "lift"
        if self.phase == "lift":
            goal = (ee[0], ee[1], CRUISE_Z)
            if _arrived(ee, goal):
                self.phase = "hold" if self.place_goal is None else "transit"
            else:
                return move(goal)
        if self.phase == "transit":
            carried = priv["objects"][self.pick_key]["position"]
            gx, gy = self.place_goal
            # steer the carried object's center, not the ee
            goal = (ee[0] + gx - carried[0], ee[1] + gy - carried[1], CRUISE_Z)
            if _arrived(ee, goal):
                self.phase = "lower"
            else:
                return move(goal)
        if self.phase == "lower":
            carried = priv["objects"][self.pick_key]
            bottom = carried["position"][2] - carried["half_extents"][2]
            dz = self.lower_bottom_z(priv) - bottom
            goal = (ee[0], ee[1], ee[2] + dz)
            if abs(dz) <= ARRIVE_TOL:
                self.phase = "open"
            else:
                return move(goal)
        if self.phase == "open":
            self.phase = "retreat"
            return [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 1.0]
        if self.phase == "retreat":
            goal = (ee[0], ee[1], CRUISE_Z)
            if _arrived(ee, goal):
                self.phase = "done"
            else:
                return move(goal)
        return hold()


class OraclePolicy(ScriptedPickerBase):
    """Ground-truth solver for all four tasks via privileged observations."""

    name = "oracle"

    def select_target(self, priv: dict[str, Any]) -> str:
        return priv["task"]["target_a"]

    def _target_b(self, priv: dict[str, Any]) -> dict[str, Any] | None:
        b_id = priv["task"]["target_b"]
        return priv["objects"][b_id] if b_id else None

    def placement(self, priv: dict[str, Any]) -> tuple[float, float] | None:
        kind = priv["task"]["kind"]
        b = self._target_b(priv)
        if kind == "pick_up" or b is None:
            return None
        bx, by, _ = b["position"]
        if kind in ("put_on", "put_in"):
            return (bx, by)
        # move_near: offset along one axis so the AABB gap lands at PLACE_GAP
        a = priv["objects"][self.pick_key]
        aex, aey = _world_half_extents_xy(a)
        bex, bey = _world_half_extents_xy(b)
        candidates = [
            (bx + bex + aex + PLACE_GAP, by),
            (bx - bex - aex - PLACE_GAP, by),
            (bx, by + bey + aey + PLACE_GAP),
            (bx, by - bey - aey - PLACE_GAP),
        ]
        return min(candidates, key=lambda p: (math.hypot(p[0], p[1]), p))

    def lower_bottom_z(self, priv: dict[str, Any]) -> float:
        kind = priv["task"]["kind"]
        b = self._target_b(priv)
        if kind == "put_on" and b is not None:
            return b["position"][2] + b["half_extents"][2] + 0.005
        if kind == "put_in" and b is not None:
            rim = b["position"][2] + b["half_extents"][2]
            return rim - 0.02
        return 0.002


class GreedyPolicy(ScriptedPickerBase):
    """Grabs and lifts whatever is nearest, ignoring the instruction."""

    name = "greedy"

    def select_target(self, priv: dict[str, Any]) -> str:
        ee = priv["ee_position"]
        best: tuple[float, str] | None = None
        for key in sorted(priv["objects"]):
            obj = priv["objects"][key]
            if not obj["graspable"]:
                continue
            x, y, z = obj["position"]
            top = (x, y, z + obj["half_extents"][2])
            d = math.dist(ee, top)
            if best is None or d < best[0]:
                best = (d, key)
        assert best is not None
        return best[1]


BUILTIN_POLICIES = {
    "echo": EchoPolicy,
    "random": RandomPolicy,
    "oracle": OraclePolicy,
    "greedy": GreedyPolicy,
}


def make_policy(name: str, seed: int = 0) -> PolicyProgram:
    if name not in BUILTIN_POLICIES:
        raise ValueError(f"unknown builtin policy {name!r} (have {sorted(BUILTIN_POLICIES)})")
    if name == "random":
        return RandomPolicy(seed=seed)
    return BUILTIN_POLICIES[name]()
