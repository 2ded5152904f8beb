from __future__ import annotations


from scenefuzz.generate import GeneratorConfig, generate_suite
from scenefuzz.oracles import TERMINATION_SUCCESS, OracleTracker
from scenefuzz.policy import PolicyConnection, parse_policy_descriptor
from scenefuzz.runner import run_episode
from scenefuzz.scene import Role, TaskKind
from scenefuzz.sim import ActionCommand, EpisodeConfig, init_world, step
from tests.conftest import build_scene, inst

CFG = EpisodeConfig()


def act(dx=0.0, dy=0.0, dz=0.0, grip=0.0):
    return ActionCommand(delta_pos=(dx, dy, dz), delta_rot=(0.0, 0.0, 0.0), delta_grip=grip)


def _walk(s, db, goal, steps=40):
    for _ in range(steps):
        d = tuple(g - c for g, c in zip(goal, s.ee_pose.position))
        s = step(s, act(*d), CFG, db)
    return s


class TestPickUpOracle:
    def test_success_after_five_lifted_frames(self, db):
        scene = build_scene([inst("coke_can", 0.0, 0.0, 0.058)], instruction="pick up Coke can")
        s = init_world(scene, db)
        tracker = OracleTracker(scene, db, CFG)
        s = _walk(s, db, (0.0, 0.0, 0.116 + 0.02))
        s = step(s, act(grip=-1.0), CFG, db)
        tracker.update(s)
        assert tracker.grasp_correct and not tracker.success
        # raise until the can's bottom clears 0.025 m, then hold
        s = _walk(s, db, (0.0, 0.0, 0.30), steps=4)
        lifted_frames = 0
        while not tracker.update(s):
            s = step(s, act(), CFG, db)
            lifted_frames += 1
            assert lifted_frames < 12
        assert tracker.mid_step and tracker.success
        assert lifted_frames >= CFG.lift_frames - 1

    def test_wrong_object_lift_keeps_grasp_false(self, db):
        scene = build_scene(
            [
                inst("pepsi_can", 0.0, 0.0, 0.058),
                inst("seven_up_can", 0.2, 0.0, 0.058, role=Role.CONFOUND),
            ],
            instruction="pick up Pepsi can",
        )
        s = init_world(scene, db)
        tracker = OracleTracker(scene, db, CFG)
        s = _walk(s, db, (0.2, 0.0, 0.116 + 0.02))
        s = step(s, act(grip=-1.0), CFG, db)
        assert s.attached.key == "seven_up_can"
        for _ in range(10):
            s = step(s, act(dz=0.05), CFG, db)
            tracker.update(s)
        assert not tracker.grasp_correct
        assert not tracker.mid_step
        assert not tracker.success

    def test_drop_resets_lift_streak(self, db):
        scene = build_scene([inst("coke_can", 0.0, 0.0, 0.058)], instruction="pick up Coke can")
        s = init_world(scene, db)
        tracker = OracleTracker(scene, db, CFG)
        s = _walk(s, db, (0.0, 0.0, 0.116 + 0.02))
        s = step(s, act(grip=-1.0), CFG, db)
        s = _walk(s, db, (0.0, 0.0, 0.30), steps=4)
        tracker.update(s)
        s = step(s, act(grip=1.0), CFG, db)  # drop it
        tracker.update(s)
        assert tracker.lift_streak == 0
        assert tracker.mid_step and not tracker.success


class TestMoveNearOracle:
    def test_gap_under_threshold_after_release(self, db):
        scene = build_scene(
            [
                inst("red_cube", -0.2, 0.0, 0.025),
                inst("blue_cube", 0.2, 0.0, 0.025, role=Role.TARGET_B),
            ],
            task_kind=TaskKind.MOVE_NEAR,
            instruction="move red cube near blue cube",
        )
        s = init_world(scene, db)
        tracker = OracleTracker(scene, db, CFG)
        s = _walk(s, db, (-0.2, 0.0, 0.05 + 0.02))
        s = step(s, act(grip=-1.0), CFG, db)
        tracker.update(s)
        # carry to 0.04 m gap: cube half extents are 0.025 each
        target_x = 0.2 - (0.025 + 0.025 + 0.04)
        s = _walk(s, db, (target_x, 0.0, 0.12), steps=10)
        tracker.update(s)
        assert tracker.mid_step  # within range while attached
        assert not tracker.success  # not released yet
        s = step(s, act(grip=1.0), CFG, db)
        assert tracker.update(s)
        assert tracker.success

    def test_far_release_is_not_success(self, db):
        scene = build_scene(
            [
                inst("red_cube", -0.2, 0.0, 0.025),
                inst("blue_cube", 0.2, 0.0, 0.025, role=Role.TARGET_B),
            ],
            task_kind=TaskKind.MOVE_NEAR,
            instruction="move red cube near blue cube",
        )
        s = init_world(scene, db)
        tracker = OracleTracker(scene, db, CFG)
        s = _walk(s, db, (-0.2, 0.0, 0.07))
        s = step(s, act(grip=-1.0), CFG, db)
        tracker.update(s)
        s = step(s, act(grip=1.0), CFG, db)  # re-release in place: 0.35 m gap
        tracker.update(s)
        assert tracker.grasp_correct and not tracker.mid_step and not tracker.success


class TestEndToEndOracles:
    def test_oracle_policy_passes_all_tasks(self, db, deny):
        for kind in TaskKind:
            cfg = GeneratorConfig(seed=101, n_confound=0)
            scenes = generate_suite(db, kind, cfg, 5, deny)
            conn = PolicyConnection(parse_policy_descriptor("oracle"))
            for scene in scenes:
                trace, result = run_episode(scene, db, conn)
                assert result.termination == TERMINATION_SUCCESS, (kind, scene.scene_id)
                assert result.success and result.mid_step and result.grasp_correct
                assert result.frames_to_success == len(trace.frames) - 1

    def test_greedy_grasps_nearest_not_target(self, db):
        # nearest object to the home pose (0, -0.25, .30) is the decoy
        scene = build_scene(
            [
                inst("pepsi_can", 0.0, 0.3, 0.058),
                inst("seven_up_can", 0.0, -0.2, 0.058, role=Role.CONFOUND),
            ],
            instruction="pick up Pepsi can",
        )
        conn = PolicyConnection(parse_policy_descriptor("greedy"))
        _, result = run_episode(scene, db, conn)
        assert not result.grasp_correct
        assert not result.success

    def test_greedy_single_object_succeeds(self, db):
        scene = build_scene([inst("pepsi_can", 0.1, 0.1, 0.058)], instruction="pick up Pepsi can")
        conn = PolicyConnection(parse_policy_descriptor("greedy"))
        _, result = run_episode(scene, db, conn)
        assert result.grasp_correct and result.success

    def test_hierarchy_always_monotone(self, db, deny):
        rng_scenes = generate_suite(
            db, TaskKind.PUT_ON, GeneratorConfig(seed=55, n_confound=(0, 2)), 6, deny
        )
        for policy in ("random:3", "greedy", "oracle"):
            conn = PolicyConnection(parse_policy_descriptor(policy))
            for scene in rng_scenes:
                _, r = run_episode(scene, db, conn, EpisodeConfig(max_steps=50))
                assert (not r.success or r.mid_step) and (not r.mid_step or r.grasp_correct)

    def test_random_policy_trace_bounded(self, db):
        scene = build_scene([inst("pepsi_can", 0.1, 0.1, 0.058)], instruction="pick up Pepsi can")
        conn = PolicyConnection(parse_policy_descriptor("random:1"))
        trace, result = run_episode(scene, db, conn, EpisodeConfig(max_steps=120))
        assert len(trace.frames) <= 121
