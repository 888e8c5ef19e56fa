"""Online phase: classify the opponent every step, deploy the counter.

The controller starts from a configured pursuer level (default 0, the
response to the non-strategic evader) and, each timestep, asks the
classifier which known evader level the history most resembles. It
switches the deployed pursuer pair only when the predicted level differs,
its probability clears a confidence threshold, and a minimum dwell time
has passed since the last switch -- plain hysteresis against classifier
chatter. With an unreachable threshold the machinery is inert and the
episode reproduces a fixed-pair rollout exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .classifier import ClassifierModel, ObservationTrack, classifier_schema_hash
from .errors import SchemaMismatchError
from .logio import EpisodeLog
from .scenario import Scenario
from .training import RewardSpec, run_episode
from .world import GridMap


@dataclass(frozen=True)
class ControllerConfig:
    theta: float = 0.7  # confidence needed to switch
    dwell: int = 5  # minimum steps between switches
    initial_level: int = 0

    def to_dict(self) -> dict:
        return {"theta": self.theta, "dwell": self.dwell, "initial_level": self.initial_level}

    @classmethod
    def from_dict(cls, d: dict) -> "ControllerConfig":
        return cls(**d)


@dataclass
class ControllerState:
    """Mutable per-episode switching state."""

    config: ControllerConfig
    deployed: int = 0
    steps_since_switch: int = 0
    switch_count: int = 0
    prob_trace: list = field(default_factory=list)

    def __post_init__(self):
        self.deployed = self.config.initial_level


def select_policies(ctrl: ControllerState, probs) -> tuple[int, bool]:
    """Apply the hysteresis rule to one probability vector.

    The argmax (ties to the lower level) replaces the deployed level only
    when it differs, reaches the confidence threshold, and the dwell time
    has elapsed. Returns the level to deploy now and whether it changed.
    """
    ctrl.prob_trace.append(tuple(float(p) for p in probs))
    best = 0
    for k in range(1, len(probs)):
        if probs[k] > probs[best]:
            best = k
    switched = False
    if (
        best != ctrl.deployed
        and probs[best] >= ctrl.config.theta
        and ctrl.steps_since_switch >= ctrl.config.dwell
    ):
        ctrl.deployed = best
        ctrl.steps_since_switch = 0
        ctrl.switch_count += 1
        switched = True
    ctrl.steps_since_switch += 1
    return ctrl.deployed, switched


class _OnlineContext:
    """Per-episode adapter handed to the episode engine."""

    def __init__(self, grid, library, model, ctrl, horizon):
        self.library = library
        self.model = model
        self.ctrl = ctrl
        self.track = ObservationTrack(grid, horizon)
        self.initial_level = ctrl.config.initial_level

    def classify_step(self, team_record):
        self.track.consume_record(team_record)
        return tuple(float(p) for p in self.model.predict_proba(self.track.features()))

    def select(self, probs):
        return select_policies(self.ctrl, probs)

    def pair(self, level: int):
        return self.library.pair(level)

    def describe(self) -> dict:
        return self.ctrl.config.to_dict()


def run_online_episode(
    grid: GridMap,
    library,
    model: ClassifierModel,
    evader_policy,
    scenario: Scenario,
    seed: int,
    config: ControllerConfig = ControllerConfig(),
    reward: RewardSpec = RewardSpec(),
) -> EpisodeLog:
    """One adaptive episode; deterministic per seed.

    The log carries the per-step probability vector, deployed level, and
    switch flag on top of the ordinary trajectory records.
    """
    if model.schema != classifier_schema_hash():
        raise SchemaMismatchError("classifier model schema does not match this build")
    if not (0 <= config.initial_level <= library.K):
        raise ValueError(f"initial level {config.initial_level} outside 0..{library.K}")
    ctrl = ControllerState(config)
    ctx = _OnlineContext(grid, library, model, ctrl, scenario.horizon)
    pair = library.pair(config.initial_level)
    result = run_episode(
        grid, scenario, pair[0], pair[1], evader_policy, seed, reward,
        record=True, online_ctx=ctx,
    )
    return result.log
