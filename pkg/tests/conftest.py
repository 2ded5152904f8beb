from __future__ import annotations

import pytest

from scenefuzz.camera import default_camera
from scenefuzz.data import deny_list_for, seen_db, unseen_db
from scenefuzz.scene import (
    LightingConfig,
    ObjectInstance,
    Pose,
    Role,
    SceneConfig,
    TaskInstance,
    TaskKind,
    scene_hash,
    with_scene_id,
)


@pytest.fixture(scope="session")
def db():
    return seen_db()


@pytest.fixture(scope="session")
def udb():
    return unseen_db()


@pytest.fixture(scope="session")
def deny(db):
    return deny_list_for(db)


def build_scene(
    objects,
    task_kind=TaskKind.PICK_UP,
    instruction="pick up X",
    target_a_id=None,
    target_b_id=None,
    lighting=None,
    camera=None,
    seed=0,
):
    """Hand-rolled scene for unit tests; roles inferred from the objects."""
    roles = {o.role: o.record_id for o in objects}
    task = TaskInstance(
        kind=task_kind,
        instruction=instruction,
        target_a_id=target_a_id or roles.get(Role.TARGET_A),
        target_b_id=target_b_id
        if target_b_id is not None
        else (roles.get(Role.TARGET_B) if task_kind.n_targets == 2 else None),
    )
    scene = SceneConfig(
        scene_id="",
        seed=seed,
        objects=tuple(objects),
        lighting=lighting or LightingConfig(),
        camera=camera or default_camera(),
        task=task,
    )
    return with_scene_id(scene, f"test-{scene_hash(scene)}")


def inst(record_id: str, x: float, y: float, z: float, yaw: float = 0.0, role=Role.TARGET_A):
    return ObjectInstance(
        record_id=record_id, pose=Pose(position=(x, y, z), orientation=(0.0, 0.0, yaw)), role=role
    )


@pytest.fixture
def scene_builder():
    return build_scene
