"""Occluded grid-world pursuit-evasion with a heterogeneous pursuer team.

A deterministic two-pursuer/one-evader game engine (overhead tracker plus
ground interceptor under building/foliage occlusion), level-based
best-response training, an observation-history classifier for the evader's
level, and an online controller that switches the deployed pursuer pair.
"""

from importlib import resources

from .world import (
    Action,
    AgentState,
    CellKind,
    EpisodeState,
    GridMap,
    JointAction,
    Role,
    Status,
    check_terminal,
    initial_state,
    load_map,
    step,
    valid_actions,
)
from .visibility import (
    Observation,
    TeamHistory,
    TeamRecord,
    fuse_team_observations,
    ground_fov,
    hlp_fov,
    line_of_sight,
    make_observation,
)
from .policies import (
    BeliefFeatures,
    Policy,
    evader_level0_act,
    make_heuristic_evader,
    make_scripted,
    make_trained,
    policy_act,
    summarize_history,
)
from .scenario import SamplerSpec, Scenario, sample_scenario
from .training import (
    LevelLibrary,
    RewardSpec,
    TrainConfig,
    build_level_library,
    optimize_policy,
    rollout,
    run_episode,
)
from .classifier import (
    ClassifierModel,
    LabeledDataset,
    classification_rate_curve,
    classify,
    generate_dataset,
    train_classifier,
)
from .controller import ControllerConfig, ControllerState, run_online_episode, select_policies
from .evaluation import CrossPlayMatrix, MetricsReport, compute_metrics, cross_play
from .logio import EpisodeLog, deserialize_log, serialize_log, strip_online
from .persist import (
    load_library,
    load_model,
    load_policy,
    save_library,
    save_model,
    save_policy,
)
from .render import render_frames, render_png_frames

__version__ = "0.1.0"


def default_map_text() -> str:
    """The bundled 20x20 city map used by the demos and experiments."""
    return resources.files(__package__).joinpath("maps/downtown20.map").read_text()
