"""scenefuzz: generation-based scene fuzzing for tabletop manipulation policies.

Generates randomized tabletop scenes, executes them against black-box
policies inside a deterministic kinematic simulator, and scores the
outcomes with per-step oracles, transfer rates, coverage, and robustness
metrics.
"""

from .scene import (
    CameraConfig,
    LightingConfig,
    ObjectDatabase,
    ObjectInstance,
    ObjectRecord,
    Pose,
    Role,
    SceneConfig,
    TaskInstance,
    TaskKind,
    load_object_db,
    load_scene,
    save_scene,
    scene_hash,
    validate_scene,
)
from .generate import (
    DenyList,
    GenerationError,
    GeneratorConfig,
    ParaphraseSet,
    generate_scene,
    generate_suite,
    mutate_camera,
    mutate_instruction,
    mutate_lighting,
    pose_sampler,
    semantic_valid,
)
from .sim import ActionCommand, EpisodeConfig, WorldState, init_world, settle, step
from .render import Observation, render_rgb
from .oracles import EpisodeResult, OracleTracker
from .runner import EpisodeTrace, run_episode
from .metrics import (
    CoverageReport,
    diff_metric,
    mann_whitney_u,
    mut_over_def,
    paired_t,
    trajectory_coverage,
    transfer_rate,
)
from .policy import PolicyConnection, PolicyDescriptor, parse_policy_descriptor

__version__ = "0.1.0"
