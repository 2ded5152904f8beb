from __future__ import annotations

import math
import random

import pytest

from scenefuzz.scene import Role, TaskKind
from scenefuzz.sim import (
    EVENT_GRASP,
    EVENT_RELEASE,
    EVENT_UNSTABLE,
    SUPPORT_IN,
    SUPPORT_ON,
    SUPPORT_TABLE,
    ActionCommand,
    EpisodeConfig,
    InvalidActionError,
    clamp_action,
    init_world,
    step,
)
from tests.conftest import build_scene, inst

CFG = EpisodeConfig()


def act(dx=0.0, dy=0.0, dz=0.0, grip=0.0, rot=(0.0, 0.0, 0.0)):
    return ActionCommand(delta_pos=(dx, dy, dz), delta_rot=rot, delta_grip=grip)


def simple_scene(db, *objects, kind=TaskKind.PICK_UP, **kw):
    return build_scene(list(objects), task_kind=kind, **kw)


class TestInitWorld:
    def test_initial_state(self, db):
        scene = simple_scene(db, inst("pepsi_can", 0.1, 0.1, 0.058), instruction="pick up Pepsi can")
        state = init_world(scene, db)
        assert state.attached is None
        assert state.frame == 0
        assert state.aperture == 1.0
        assert state.ee_pose.position == CFG.home_position
        assert state.events == ()

    def test_cardinality(self, db, deny):
        from scenefuzz.generate import GeneratorConfig, generate_scene

        cfg = GeneratorConfig(seed=0, n_confound=4)
        scene = generate_scene(db, TaskKind.MOVE_NEAR, cfg, random.Random(3), deny)
        state = init_world(scene, db)
        assert len(state.object_poses) == 6

    def test_determinism_across_reload(self, db, tmp_path):
        from scenefuzz.scene import load_scene, save_scene

        scene = simple_scene(db, inst("red_cube", 0.0, 0.2, 0.025), instruction="pick up red cube")
        reloaded = load_scene(save_scene(scene, tmp_path / "s.scene.json"))
        assert init_world(scene, db) == init_world(reloaded, db)


class TestStep:
    def test_pure_translation_moves_only_ee(self, db):
        scene = simple_scene(db, inst("pepsi_can", 0.2, 0.2, 0.058), instruction="x")
        s0 = init_world(scene, db)
        s1 = step(s0, act(dx=0.05, dy=-0.02, dz=0.01), CFG, db)
        assert s1.ee_pose.position != s0.ee_pose.position
        assert s1.object_poses == s0.object_poses
        assert s1.events == ()
        assert s1.frame == 1

    def test_translation_clamped_to_norm(self):
        clamped = clamp_action(act(dx=0.5), CFG)
        assert math.isclose(math.hypot(*clamped.delta_pos), 0.10)
        assert clamped.delta_pos[1] == clamped.delta_pos[2] == 0.0

    def test_rotation_clamped_per_axis(self):
        clamped = clamp_action(act(rot=(1.0, -1.0, 0.1)), CFG)
        assert clamped.delta_rot == (0.20, -0.20, 0.1)

    def test_non_finite_action_rejected(self, db):
        scene = simple_scene(db, inst("pepsi_can", 0.2, 0.2, 0.058), instruction="x")
        s0 = init_world(scene, db)
        with pytest.raises(InvalidActionError):
            step(s0, act(dx=float("nan")), CFG, db)

    def test_ee_z_clamped_to_table(self, db):
        scene = simple_scene(db, inst("pepsi_can", 0.2, 0.2, 0.058), instruction="x")
        s = init_world(scene, db)
        for _ in range(10):
            s = step(s, act(dz=-0.1), CFG, db)
        assert s.ee_pose.position[2] == 0.0

    def test_grasp_when_closing_near_top_center(self, db):
        scene = simple_scene(db, inst("coke_can", 0.0, 0.0, 0.058), instruction="x")
        s = init_world(scene, db)
        # teleport-ish: walk the ee to 0.03 m above the can's top
        goal = (0.0, 0.0, 0.116 + 0.03)
        for _ in range(30):
            cur = s.ee_pose.position
            d = tuple(g - c for g, c in zip(goal, cur))
            s = step(s, act(*d), CFG, db)
        assert math.dist(s.ee_pose.position, goal) < 1e-9
        s = step(s, act(grip=-1.0), CFG, db)
        assert s.attached is not None and s.attached.key == "coke_can"
        assert [e.kind for e in s.events] == [EVENT_GRASP]

    def test_no_grasp_outside_radius(self, db):
        scene = simple_scene(db, inst("coke_can", 0.0, 0.0, 0.058), instruction="x")
        s = init_world(scene, db)
        s = step(s, act(grip=-1.0), CFG, db)  # home pose is far from the can
        assert s.attached is None

    def test_non_graspable_never_attaches(self, db, tmp_path):
        import json

        from scenefuzz.data import data_path
        from scenefuzz.scene import load_object_db

        recs = json.loads(data_path("objects_seen.json").read_text())
        for r in recs:
            if r["id"] == "coke_can":
                r["graspable"] = False
        path = tmp_path / "db.json"
        path.write_text(json.dumps(recs))
        db2 = load_object_db(path)
        scene = simple_scene(db2, inst("coke_can", 0.0, 0.0, 0.058), instruction="x")
        s = init_world(scene, db2)
        goal = (0.0, 0.0, 0.116 + 0.02)
        for _ in range(30):
            d = tuple(g - c for g, c in zip(goal, s.ee_pose.position))
            s = step(s, act(*d), CFG, db2)
        s = step(s, act(grip=-1.0), CFG, db2)
        assert s.attached is None

    def test_carried_object_tracks_ee(self, db):
        scene = simple_scene(db, inst("red_cube", 0.0, 0.0, 0.025), instruction="x")
        s = _grasped_state(db, scene, "red_cube")
        offset = s.attached.offset
        s2 = step(s, act(dx=0.05, dz=0.04), CFG, db)
        ee = s2.ee_pose.position
        obj = s2.object_poses["red_cube"].position
        assert all(math.isclose(o, e + f, abs_tol=1e-12) for o, e, f in zip(obj, ee, offset))


def _grasped_state(db, scene, key):
    s = init_world(scene, db)
    rec = db.get(key)
    pose = scene.objects[[o.record_id for o in scene.objects].index(key)].pose
    goal = (pose.position[0], pose.position[1], pose.position[2] + rec.half_height + 0.02)
    for _ in range(40):
        d = tuple(g - c for g, c in zip(goal, s.ee_pose.position))
        s = step(s, act(*d), CFG, db)
    s = step(s, act(grip=-1.0), CFG, db)
    assert s.attached is not None and s.attached.key == key, "test rig failed to grasp"
    return s


class TestSettle:
    def test_centered_stack_is_stable(self, db):
        scene = simple_scene(
            db,
            inst("red_cube", 0.0, 0.0, 0.025),
            inst("blue_basket", 0.25, 0.0, 0.075, role=Role.CONFOUND),
            instruction="x",
        )
        s = _grasped_state(db, scene, "red_cube")
        # carry over the basket center, high above the rim
        goal = (0.25, 0.0, 0.40)
        for _ in range(40):
            d = tuple(g - c for g, c in zip(goal, s.ee_pose.position))
            s = step(s, act(*d), CFG, db)
        s = step(s, act(grip=1.0), CFG, db)
        # released above the rim with center over the cavity: rests on the rim
        # only if outside the cavity; dead-center means containment is skipped
        # (bottom above rim), so it stacks on the basket's top face.
        assert s.supports["red_cube"] == (SUPPORT_ON, "blue_basket")
        assert not any(e.kind == EVENT_UNSTABLE for e in s.events)

    def test_edge_release_drops_to_table_with_event(self, db):
        scene = simple_scene(
            db,
            inst("red_cube", 0.0, 0.0, 0.025),
            inst("green_bin", 0.3, 0.0, 0.08, role=Role.CONFOUND),
            instruction="x",
        )
        s = _grasped_state(db, scene, "red_cube")
        # 2 mm inside the bin's footprint edge (margin is 10 mm): unstable
        goal = (0.3 + 0.12 - 0.002, 0.0, 0.40)
        for _ in range(40):
            d = tuple(g - c for g, c in zip(goal, s.ee_pose.position))
            s = step(s, act(*d), CFG, db)
        s = step(s, act(grip=1.0), CFG, db)
        assert s.supports["red_cube"] == (SUPPORT_TABLE, None)
        assert s.object_poses["red_cube"].position[2] == 0.025
        assert any(e.kind == EVENT_UNSTABLE for e in s.events)

    def test_release_into_cavity_lands_on_floor(self, db):
        scene = simple_scene(
            db,
            inst("coke_can", 0.0, 0.0, 0.058),
            inst("orange_pot", 0.3, 0.0, 0.07, role=Role.CONFOUND),
            instruction="x",
        )
        s = _grasped_state(db, scene, "coke_can")
        rim = 0.07 + 0.07  # pot center z + half height
        # lower the can so its bottom is just below the rim, centered on the pot
        goal_bottom = rim - 0.02
        for _ in range(60):
            can = s.object_poses["coke_can"].position
            bottom = can[2] - 0.058
            d = (0.3 - can[0], 0.0 - can[1], goal_bottom - bottom)
            s = step(s, act(*d), CFG, db)
        s = step(s, act(grip=1.0), CFG, db)
        assert s.supports["coke_can"] == (SUPPORT_IN, "orange_pot")
        cavity_floor = rim - 2 * 0.065
        assert math.isclose(
            s.object_poses["coke_can"].position[2], cavity_floor + 0.058, abs_tol=1e-9
        )

    def test_plain_release_drops_to_table(self, db):
        scene = simple_scene(db, inst("red_cube", 0.0, 0.0, 0.025), instruction="x")
        s = _grasped_state(db, scene, "red_cube")
        s = step(s, act(grip=1.0), CFG, db)
        assert s.object_poses["red_cube"].position[2] == 0.025
        assert s.supports["red_cube"] == (SUPPORT_TABLE, None)
        kinds = [e.kind for e in s.events]
        assert kinds == [EVENT_GRASP, EVENT_RELEASE]


class TestInvariants:
    def test_random_rollouts_keep_objects_supported(self, db, deny):
        from scenefuzz.generate import GeneratorConfig, generate_suite

        cfg = GeneratorConfig(seed=31, n_confound=(0, 3))
        scenes = generate_suite(db, TaskKind.MOVE_NEAR, cfg, 5, deny)
        rng = random.Random(0)
        for scene in scenes:
            s = init_world(scene, db)
            for _ in range(60):
                a = act(
                    rng.uniform(-0.2, 0.2),
                    rng.uniform(-0.2, 0.2),
                    rng.uniform(-0.2, 0.2),
                    grip=rng.uniform(-1, 1),
                )
                prev_ee = s.ee_pose.position
                s = step(s, a, CFG, db, confounder_keys=frozenset(
                    o.record_id for o in scene.confounders
                ))
                # applied deltas never exceed the translation clamp
                assert math.dist(prev_ee, s.ee_pose.position) <= CFG.translation_clamp + 1e-12
                attached = s.attached.key if s.attached else None
                for key, pose in s.object_poses.items():
                    if key == attached:
                        continue
                    rec = db.get(key)
                    bottom = pose.position[2] - rec.half_height
                    support, ref = s.supports[key]
                    if support == SUPPORT_TABLE:
                        assert math.isclose(bottom, 0.0, abs_tol=1e-9)
                    elif support == SUPPORT_ON:
                        other = s.object_poses[ref]
                        top = other.position[2] + db.get(ref).half_height
                        assert math.isclose(bottom, top, abs_tol=1e-9)
                    elif support == SUPPORT_IN:
                        rec_c = db.get(ref)
                        pose_c = s.object_poses[ref]
                        from scenefuzz.geometry import cavity_floor_z

                        assert math.isclose(
                            bottom, cavity_floor_z(rec_c, pose_c), abs_tol=1e-9
                        )

    def test_grasp_release_events_alternate(self, db):
        scene = simple_scene(db, inst("red_cube", 0.0, 0.0, 0.025), instruction="x")
        s = _grasped_state(db, scene, "red_cube")
        s = step(s, act(grip=1.0), CFG, db)
        s = step(s, act(grip=-1.0), CFG, db)  # re-grasp (still at the right spot)
        s = step(s, act(grip=1.0), CFG, db)
        kinds = [e.kind for e in s.events if e.kind in (EVENT_GRASP, EVENT_RELEASE)]
        assert kinds == [EVENT_GRASP, EVENT_RELEASE, EVENT_GRASP, EVENT_RELEASE]

    def test_at_most_one_attachment(self, db):
        # two objects within one grasp radius is impossible at generation
        # time, but the closing edge must still pick exactly one (nearest)
        scene = simple_scene(
            db,
            inst("red_cube", 0.0, 0.0, 0.025),
            inst("green_cube", 0.03, 0.0, 0.025, role=Role.CONFOUND),
            instruction="x",
        )
        s = init_world(scene, db)
        goal = (0.005, 0.0, 0.05 + 0.015)
        for _ in range(30):
            d = tuple(g - c for g, c in zip(goal, s.ee_pose.position))
            s = step(s, act(*d), CFG, db)
        s = step(s, act(grip=-1.0), CFG, db)
        assert s.attached is not None and s.attached.key == "red_cube"
