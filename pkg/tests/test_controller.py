"""Switching hysteresis and the online episode reduction property."""

import numpy as np
import pytest

from pegrid.classifier import ClassifierModel, FEATURE_NAMES
from pegrid.controller import (
    ControllerConfig,
    ControllerState,
    run_online_episode,
    select_policies,
)
from pegrid.errors import SchemaMismatchError
from pegrid.logio import serialize_log, strip_online
from pegrid.policies import make_heuristic_evader, make_trained
from pegrid.scenario import SamplerSpec, Scenario
from pegrid.training import LevelLibrary, RewardSpec, TrainConfig, rollout
from pegrid.world import Role, load_map


def zero_model(horizon=40, classes=(0, 1)):
    d = len(FEATURE_NAMES)
    return ClassifierModel(
        weights=np.zeros((len(classes), d + 1)),
        mu=np.zeros(d), sigma=np.ones(d), classes=classes, horizon=horizon,
    )


@pytest.fixture(scope="module")
def world():
    grid = load_map("\n".join(["." * 10] * 10) + "\n")
    library = LevelLibrary(
        K=1,
        evaders=[make_heuristic_evader(), make_trained(Role.EVADER, 1, 91)],
        pursuer_pairs=[
            (make_trained(Role.HLP, 0, 11), make_trained(Role.LLP, 0, 12)),
            (make_trained(Role.HLP, 1, 21), make_trained(Role.LLP, 1, 22)),
        ],
        config=TrainConfig(sampler=SamplerSpec(horizon=40)),
        reward=RewardSpec(),
        seed=7,
    )
    return grid, library


class TestSelectPolicies:
    def make(self, theta=0.7, dwell=5, level=0):
        return ControllerState(ControllerConfig(theta=theta, dwell=dwell, initial_level=level))

    def test_argmax_equals_current_stays(self):
        ctrl = self.make()
        ctrl.steps_since_switch = 10
        level, switched = select_policies(ctrl, (0.9, 0.1))
        assert (level, switched) == (0, False)

    def test_confident_switch(self):
        ctrl = self.make()
        ctrl.steps_since_switch = 10
        level, switched = select_policies(ctrl, (0.2, 0.8))
        assert (level, switched) == (1, True)
        assert ctrl.switch_count == 1

    def test_below_threshold_stays(self):
        ctrl = self.make()
        ctrl.steps_since_switch = 10
        level, switched = select_policies(ctrl, (0.4, 0.6))
        assert (level, switched) == (0, False)

    def test_dwell_blocks_early_switch(self):
        ctrl = self.make()
        for _ in range(5):  # steps 0..4: dwell not yet satisfied
            level, switched = select_policies(ctrl, (0.1, 0.9))
            assert not switched
        level, switched = select_policies(ctrl, (0.1, 0.9))
        assert switched and level == 1

    def test_tie_breaks_to_lower_level(self):
        ctrl = self.make(theta=0.5, level=1)
        ctrl.steps_since_switch = 10
        level, switched = select_policies(ctrl, (0.5, 0.5))
        assert level == 0 and switched  # argmax tie -> lower index

    def test_switch_budget_bound(self, rng):
        horizon, dwell = 100, 5
        for _ in range(20):
            ctrl = self.make(theta=0.5, dwell=dwell)
            for _t in range(horizon):
                p = float(rng.random())
                select_policies(ctrl, (p, 1.0 - p))
            assert ctrl.switch_count <= horizon // dwell

    def test_oracle_classifier_converges_within_dwell(self):
        ctrl = self.make(theta=0.7, dwell=5, level=0)
        deployed = []
        for _t in range(20):
            level, _ = select_policies(ctrl, (0.0, 1.0))
            deployed.append(level)
        assert deployed[5] == 1  # first eligible step
        assert all(v == 1 for v in deployed[5:])  # never leaves


class TestRunOnlineEpisode:
    def test_unreachable_threshold_reduces_to_rollout(self, world):
        grid, library = world
        scenario = Scenario((0, 2), (0, 7), (7, 2), (2, 9), horizon=40)
        model = zero_model()
        online = run_online_episode(
            grid, library, model, library.evader(0), scenario, seed=33,
            config=ControllerConfig(theta=1.1, dwell=5, initial_level=0),
        )
        offline = rollout(grid, library.pair(0), library.evader(0), scenario, 33)
        assert not any(rec.switched for rec in online.steps)
        assert serialize_log(strip_online(online)) == serialize_log(offline)

    def test_online_log_carries_trace(self, world):
        grid, library = world
        scenario = Scenario((0, 2), (0, 7), (7, 2), (2, 9), horizon=40)
        log = run_online_episode(
            grid, library, zero_model(), library.evader(0), scenario, seed=4,
        )
        assert log.online
        for rec in log.steps:
            assert rec.probs is not None and abs(sum(rec.probs) - 1) < 1e-9
            assert rec.deployed in (0, 1)

    def test_switch_budget_in_real_episodes(self, world):
        grid, library = world
        scenario = Scenario((0, 2), (0, 7), (7, 2), (2, 9), horizon=40)
        log = run_online_episode(
            grid, library, zero_model(), library.evader(0), scenario, seed=4,
            config=ControllerConfig(theta=0.4, dwell=5),
        )
        switches = sum(bool(rec.switched) for rec in log.steps)
        assert switches <= scenario.horizon // 5

    def test_determinism(self, world):
        grid, library = world
        scenario = Scenario((0, 2), (0, 7), (7, 2), (2, 9), horizon=40)
        a = run_online_episode(grid, library, zero_model(), library.evader(0), scenario, seed=9)
        b = run_online_episode(grid, library, zero_model(), library.evader(0), scenario, seed=9)
        assert serialize_log(a) == serialize_log(b)

    def test_schema_guard(self, world):
        grid, library = world
        scenario = Scenario((0, 2), (0, 7), (7, 2), (2, 9), horizon=40)
        model = zero_model()
        model.schema = "stale"
        with pytest.raises(SchemaMismatchError):
            run_online_episode(grid, library, model, library.evader(0), scenario, seed=1)

    def test_initial_level_bounds_checked(self, world):
        grid, library = world
        scenario = Scenario((0, 2), (0, 7), (7, 2), (2, 9), horizon=40)
        with pytest.raises(ValueError):
            run_online_episode(
                grid, library, zero_model(), library.evader(0), scenario, seed=1,
                config=ControllerConfig(initial_level=5),
            )
