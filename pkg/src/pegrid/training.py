"""Offline phase: rollouts, temporal-difference training, level library.

The level hierarchy alternates best responses starting from the scripted
evader: pursuer pair i is trained against evader i, and evader i+1 is
trained against the frozen pursuer pair i. Training is episodic Q-learning
over discretized belief features with epsilon-greedy exploration; the two
pursuer policies are trained jointly on one shared team reward but keep
separate tables, preserving their asymmetric roles.

Every episode -- training, evaluation, logged rollout, online -- runs
through the same engine, so behavior cannot drift between phases. Each
agent draws from its own seeded RNG substream, which keeps trajectories
bit-reproducible and lets greedy policies consume no randomness at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .errors import NoImprovementError
from .logio import EpisodeLog, StepRecord, config_hash, digest_cells, map_hash
from .policies import (
    EvaderBelief,
    Policy,
    TeamBelief,
    make_heuristic_evader,
    make_trained,
    policy_act,
    state_key,
)
from .scenario import SamplerSpec, Scenario, sample_scenario
from .visibility import TeamRecord, make_observation
from .world import (
    ACTION_INDEX,
    ACTIONS,
    GridMap,
    JointAction,
    Role,
    Status,
    step,
    valid_actions,
)

PURSUER_PAIR = "pursuer_pair"
EVADER = "evader"


@dataclass(frozen=True)
class RewardSpec:
    """Scalar reward weights; terminal rewards must dominate shaping.

    Defaults are the calibrated experiment values: interception pays twice
    the evader's goal bounty, and per-step sighting bonuses reward the team
    for information without ever outweighing the terminals.
    """

    capture: float = 20.0
    goal: float = 10.0
    step_cost: float = 0.01
    detection_bonus: float = 0.09

    def validate_for_horizon(self, horizon: int) -> None:
        if abs(self.detection_bonus) * horizon >= min(self.capture, self.goal):
            raise ValueError("detection shaping would dominate terminal rewards")

    def to_dict(self) -> dict:
        return {
            "capture": self.capture,
            "goal": self.goal,
            "step_cost": self.step_cost,
            "detection_bonus": self.detection_bonus,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RewardSpec":
        return cls(**d)


MONTE_CARLO = "monte_carlo"
Q_LEARNING = "q_learning"


@dataclass(frozen=True)
class TrainConfig:
    episodes_per_iteration: int = 2000
    iterations: int = 32
    learning_rate: float = 0.2
    epsilon_start: float = 1.0
    epsilon_end: float = 0.05
    discount: float = 0.99
    evaluation_episodes: int = 300
    checkpoint_episodes: int = 80
    level0_epsilon: float = 0.1
    algorithm: str = MONTE_CARLO
    sampler: SamplerSpec = field(default_factory=SamplerSpec)

    def __post_init__(self):
        if self.episodes_per_iteration <= 0 or self.evaluation_episodes <= 0:
            raise ValueError("episode counts must be positive")
        if self.checkpoint_episodes <= 0:
            raise ValueError("checkpoint episode count must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if not (0.0 <= self.epsilon_end <= self.epsilon_start <= 1.0):
            raise ValueError("exploration schedule must be nonincreasing within [0,1]")
        if not (0.0 < self.learning_rate <= 1.0) or not (0.0 < self.discount <= 1.0):
            raise ValueError("learning rate and discount must lie in (0,1]")
        if self.algorithm not in (MONTE_CARLO, Q_LEARNING):
            raise ValueError(f"unknown algorithm {self.algorithm!r}")

    @property
    def total_episodes(self) -> int:
        return self.episodes_per_iteration * self.iterations

    def to_dict(self) -> dict:
        d = {
            "episodes_per_iteration": self.episodes_per_iteration,
            "iterations": self.iterations,
            "learning_rate": self.learning_rate,
            "epsilon_start": self.epsilon_start,
            "epsilon_end": self.epsilon_end,
            "discount": self.discount,
            "evaluation_episodes": self.evaluation_episodes,
            "checkpoint_episodes": self.checkpoint_episodes,
            "level0_epsilon": self.level0_epsilon,
            "algorithm": self.algorithm,
            "sampler": self.sampler.to_dict(),
        }
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["sampler"] = SamplerSpec.from_dict(d["sampler"])
        return cls(**d)


def _sub_rng(seed: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence((seed,) + key)))


def _sub_seed(seed: int, *key: int) -> int:
    return int(np.random.SeedSequence((seed,) + key).generate_state(1)[0])


def _step_rewards(reward: RewardSpec, status: Status, detected: bool) -> tuple[float, float]:
    r_p = -reward.step_cost
    r_e = -reward.step_cost
    if detected:
        r_p += reward.detection_bonus
        r_e -= reward.detection_bonus
    if status == Status.PURSUER_WIN:
        r_p += reward.capture
        r_e -= reward.capture
    elif status == Status.EVADER_WIN:
        r_p -= reward.goal
        r_e += reward.goal
    return r_p, r_e


class EpisodeLearner:
    """Value updates for the policies under training.

    Two contract-equivalent modes: every-visit Monte-Carlo on episodic
    returns (default; robust to the sparse terminal rewards here) and
    one-step Q-learning. The engine feeds transitions through
    :meth:`record` and closes each episode with :meth:`end_episode`.
    """

    def __init__(self, policies: dict, alpha: float, gamma: float, algorithm: str = MONTE_CARLO):
        self.policies = policies  # role -> Policy (kind == trained)
        self.alpha = alpha
        self.gamma = gamma
        self.algorithm = algorithm
        self.epsilon = 0.0
        self._episode: dict = {role: [] for role in policies}

    def _row(self, policy: Policy, key) -> list[float]:
        row = policy.params.get(key)
        if row is None:
            row = list(policy.q_row(key))
            policy.params[key] = row
        return row

    def record(self, role: Role, key, action, r: float, next_key, next_valid, terminal: bool):
        if self.algorithm == MONTE_CARLO:
            self._episode[role].append((key, action, r))
            return
        policy = self.policies[role]
        row = self._row(policy, key)
        target = r
        if not terminal:
            next_row = policy.q_row(next_key)
            target += self.gamma * max(next_row[ACTION_INDEX[a]] for a in next_valid)
        idx = ACTION_INDEX[action]
        row[idx] += self.alpha * (target - row[idx])

    def end_episode(self):
        if self.algorithm != MONTE_CARLO:
            return
        for role, transitions in self._episode.items():
            policy = self.policies[role]
            g = 0.0
            for key, action, r in reversed(transitions):
                g = r + self.gamma * g
                row = self._row(policy, key)
                idx = ACTION_INDEX[action]
                row[idx] += self.alpha * (g - row[idx])
            transitions.clear()


@dataclass
class EpisodeResult:
    log: EpisodeLog | None
    pursuer_return: float
    evader_return: float
    status: Status
    final_t: int


def _agents_dict(state) -> dict:
    return {
        "hlp": [list(state.hlp.position), state.hlp.heading],
        "llp": [list(state.llp.position), state.llp.heading],
        "evader": [list(state.evader.position), state.evader.heading],
    }


def _obs_dict(obs) -> dict:
    return {
        "visible": digest_cells(obs.visible_cells),
        "detections": [[r.value, list(c)] for r, c in obs.detections],
    }


def _build_header(
    grid, scenario, hlp_pol, llp_pol, evader_pol, seed, mode, pursuer_level, controller=None
) -> dict:
    policies = {
        "hlp": hlp_pol.identity(),
        "llp": llp_pol.identity(),
        "evader": evader_pol.identity(),
        "evader_level": evader_pol.level,
        "pursuer_level": pursuer_level,
    }
    mhash = map_hash(grid)
    payload = {
        "map_hash": mhash,
        "scenario": scenario.to_dict(),
        "policies": policies,
        "seed": seed,
    }
    header = {
        "mode": mode,
        "seed": seed,
        "map_hash": mhash,
        "scenario": scenario.to_dict(),
        "policies": policies,
        "config_hash": config_hash(payload),
    }
    if controller is not None:
        header["controller"] = controller
    return header


def run_episode(
    grid: GridMap,
    scenario: Scenario,
    hlp_policy: Policy,
    llp_policy: Policy,
    evader_policy: Policy,
    seed: int,
    reward: RewardSpec = RewardSpec(),
    record: bool = True,
    trainer: EpisodeLearner | None = None,
    online_ctx=None,
) -> EpisodeResult:
    """Run one full episode; the single engine behind every phase.

    ``trainer`` enables TD updates and exploration for the policies it
    holds; ``online_ctx`` (duck-typed: classify_step / select / pair)
    switches the deployed pursuer pair per step and adds the classifier
    trace to the log.
    """
    horizon = scenario.horizon
    rng_h = _sub_rng(seed, 0)
    rng_l = _sub_rng(seed, 1)
    rng_e = _sub_rng(seed, 2)
    state = scenario.start_state(grid)
    team_acc = TeamBelief(grid, horizon)
    ev_acc = EvaderBelief(grid, scenario.evader_goal, horizon)
    steps: list[StepRecord] = []
    pending = None  # (updates, rec_index) from the previous step
    returns = [0.0, 0.0]
    mode = "online" if online_ctx is not None else "offline"

    while True:
        obs_h = make_observation(grid, state, Role.HLP, scenario.hlp_radius, scenario.ground_radius)
        obs_l = make_observation(grid, state, Role.LLP, scenario.hlp_radius, scenario.ground_radius)
        obs_e = make_observation(grid, state, Role.EVADER, scenario.hlp_radius, scenario.ground_radius)
        team_rec = TeamRecord(state.t, obs_h, obs_l)
        team_acc.consume(team_rec)
        ev_acc.consume(obs_e)
        detected = team_rec.evader_cell() is not None
        feats_team = team_acc.snapshot(team_rec)
        feats_ev = ev_acc.snapshot(obs_e)
        terminal = state.status != Status.RUNNING

        if pending is not None:
            r_p, r_e = _step_rewards(reward, state.status, detected)
            returns[0] += r_p
            returns[1] += r_e
            if record:
                idx = pending["rec_index"]
                steps[idx] = StepRecord(
                    t=steps[idx].t,
                    agents=steps[idx].agents,
                    obs=steps[idx].obs,
                    action=pending["action_dict"],
                    rewards=(r_p, r_e),
                    probs=steps[idx].probs,
                    deployed=steps[idx].deployed,
                    switched=steps[idx].switched,
                )
            if trainer is not None:
                for role, key, act in pending["updates"]:
                    r = r_e if role == Role.EVADER else r_p
                    if terminal:
                        trainer.record(role, key, act, r, None, None, True)
                    else:
                        feats = feats_ev if role == Role.EVADER else feats_team
                        nxt_key = state_key(role, feats, grid)
                        nxt_valid = valid_actions(grid, state.agent(role))
                        trainer.record(role, key, act, r, nxt_key, nxt_valid, False)

        probs = deployed = switched = None
        if online_ctx is not None:
            probs = online_ctx.classify_step(team_rec)
            deployed, switched = online_ctx.select(probs)
            hlp_policy, llp_policy = online_ctx.pair(deployed)

        if record:
            steps.append(
                StepRecord(
                    t=state.t,
                    agents=_agents_dict(state),
                    obs={"hlp": _obs_dict(obs_h), "llp": _obs_dict(obs_l), "evader": _obs_dict(obs_e)},
                    probs=probs,
                    deployed=deployed,
                    switched=switched,
                )
            )
        if terminal:
            if trainer is not None:
                trainer.end_episode()
            break

        valid_h = valid_actions(grid, state.hlp)
        valid_l = valid_actions(grid, state.llp)
        valid_e = valid_actions(grid, state.evader)
        eps = trainer.epsilon if trainer is not None else 0.0
        eps_h = eps if trainer and Role.HLP in trainer.policies else 0.0
        eps_l = eps if trainer and Role.LLP in trainer.policies else 0.0
        eps_e = eps if trainer and Role.EVADER in trainer.policies else 0.0
        a_h = policy_act(hlp_policy, feats_team, valid_h, rng_h, grid, eps_h)
        a_l = policy_act(llp_policy, feats_team, valid_l, rng_l, grid, eps_l)
        a_e = policy_act(evader_policy, feats_ev, valid_e, rng_e, grid, eps_e)

        updates = []
        if trainer is not None:
            for role, act in ((Role.HLP, a_h), (Role.LLP, a_l), (Role.EVADER, a_e)):
                if role in trainer.policies:
                    feats = feats_ev if role == Role.EVADER else feats_team
                    updates.append((role, state_key(role, feats, grid), act))
        pending = {
            "updates": updates,
            "action_dict": {"hlp": a_h.value, "llp": a_l.value, "evader": a_e.value},
            "rec_index": len(steps) - 1,
        }
        state = step(state, JointAction(a_h, a_l, a_e), horizon)

    log = None
    if record:
        controller = online_ctx.describe() if online_ctx is not None else None
        pursuer_level = (
            online_ctx.initial_level if online_ctx is not None else hlp_policy.level
        )
        header = _build_header(
            grid,
            scenario,
            online_ctx.pair(pursuer_level)[0] if online_ctx is not None else hlp_policy,
            online_ctx.pair(pursuer_level)[1] if online_ctx is not None else llp_policy,
            evader_policy,
            seed,
            mode,
            pursuer_level,
            controller,
        )
        log = EpisodeLog(header=header, steps=steps, status=state.status, final_t=state.t)
    return EpisodeResult(log, returns[0], returns[1], state.status, state.t)


def rollout(
    grid: GridMap,
    pursuer_pair: tuple[Policy, Policy],
    evader_policy: Policy,
    scenario: Scenario,
    seed: int,
    reward: RewardSpec = RewardSpec(),
) -> EpisodeLog:
    """One fixed-policy episode, fully logged; bit-reproducible per seed."""
    hlp_pol, llp_pol = pursuer_pair
    return run_episode(
        grid, scenario, hlp_pol, llp_pol, evader_policy, seed, reward, record=True
    ).log


def _evaluate(
    grid: GridMap,
    pair: tuple[Policy, Policy],
    evader_policy: Policy,
    config: TrainConfig,
    reward: RewardSpec,
    seed: int,
    side: str,
    n: int,
    stream: int = 3,
) -> dict:
    """Greedy evaluation over sampled scenarios.

    Calls sharing (seed, stream, n) see identical scenarios and episode
    seeds, so successive evaluations are paired.
    """
    returns = np.empty(n)
    wins = 0
    for k in range(n):
        scenario = sample_scenario(grid, _sub_rng(seed, stream, k, 0), config.sampler)
        result = run_episode(
            grid, scenario, pair[0], pair[1], evader_policy, _sub_seed(seed, stream, k, 1),
            reward, record=False,
        )
        if side == PURSUER_PAIR:
            returns[k] = result.pursuer_return
            wins += result.status == Status.PURSUER_WIN
        else:
            returns[k] = result.evader_return
            wins += result.status != Status.PURSUER_WIN
    return {
        "mean_return": float(returns.mean()),
        "win_rate": wins / n,
        "returns": returns,
        "episodes": n,
    }


def optimize_policy(
    role_scope: str,
    fixed_opponents,
    reward: RewardSpec,
    config: TrainConfig,
    seed: int,
    level: int = 0,
    grid: GridMap = None,
):
    """Train a best response against frozen opponents.

    ``role_scope`` is ``"pursuer_pair"`` (returns a (HLP, LLP) policy pair,
    trained jointly on the shared team reward) or ``"evader"`` (returns one
    policy). ``fixed_opponents`` is the evader policy, respectively the
    pursuer pair; it is never modified. Raises
    :class:`NoImprovementError` -- carrying the trained-so-far policies and
    evaluation statistics -- when the trained policies fail to beat the
    uniform-random-parameter initial policies with one-sided significance
    p < 0.05 on paired evaluation episodes.
    """
    if grid is None:
        raise ValueError("optimize_policy needs the grid")
    reward.validate_for_horizon(config.sampler.horizon)
    if role_scope == PURSUER_PAIR:
        evader_policy = fixed_opponents
        trained = {
            Role.HLP: make_trained(Role.HLP, level, _sub_seed(seed, 10)),
            Role.LLP: make_trained(Role.LLP, level, _sub_seed(seed, 11)),
        }
        pair = (trained[Role.HLP], trained[Role.LLP])
    elif role_scope == EVADER:
        evader_policy = make_trained(Role.EVADER, level, _sub_seed(seed, 12))
        trained = {Role.EVADER: evader_policy}
        pair = fixed_opponents
    else:
        raise ValueError(f"unknown role scope {role_scope!r}")

    baseline = _evaluate(
        grid, pair, evader_policy, config, reward, seed, role_scope,
        config.evaluation_episodes, stream=3,
    )

    trainer = EpisodeLearner(trained, config.learning_rate, config.discount, config.algorithm)
    total = config.total_episodes
    sampler_rng = _sub_rng(seed, 1)
    best_params = {role: dict(p.params) for role, p in trained.items()}
    best_checkpoint = None
    e = 0
    for _it in range(config.iterations):
        for _ in range(config.episodes_per_iteration):
            frac = e / max(1, total - 1)
            trainer.epsilon = config.epsilon_start + frac * (config.epsilon_end - config.epsilon_start)
            trainer.alpha = config.learning_rate * (1.0 - 0.75 * frac)
            scenario = sample_scenario(grid, sampler_rng, config.sampler)
            run_episode(
                grid, scenario, pair[0], pair[1], evader_policy, _sub_seed(seed, 2, e),
                reward, record=False, trainer=trainer,
            )
            e += 1
        # keep the best iteration snapshot, judged on a fixed scenario set
        check = _evaluate(
            grid, pair, evader_policy, config, reward, seed, role_scope,
            config.checkpoint_episodes, stream=5,
        )
        score = (check["win_rate"], check["mean_return"])
        if best_checkpoint is None or score > best_checkpoint:
            best_checkpoint = score
            best_params = {
                role: {k: list(v) for k, v in p.params.items()} for role, p in trained.items()
            }
    for role, p in trained.items():
        p.params = best_params[role]

    final = _evaluate(
        grid, pair, evader_policy, config, reward, seed, role_scope,
        config.evaluation_episodes, stream=3,
    )
    diffs = final["returns"] - baseline["returns"]
    if np.all(diffs == 0):
        p_value = 1.0
    else:
        p_value = float(stats.ttest_rel(final["returns"], baseline["returns"], alternative="greater").pvalue)
    result = pair if role_scope == PURSUER_PAIR else evader_policy
    summary = {
        "baseline_mean_return": baseline["mean_return"],
        "mean_return": final["mean_return"],
        "baseline_win_rate": baseline["win_rate"],
        "win_rate": final["win_rate"],
        "p_value": p_value,
        "episodes": config.evaluation_episodes,
        "training_episodes": total,
    }
    if not (final["mean_return"] >= baseline["mean_return"] and p_value < 0.05):
        raise NoImprovementError(
            f"{role_scope} training did not improve (p={p_value:.4f}, "
            f"mean {baseline['mean_return']:.3f} -> {final['mean_return']:.3f})",
            policies=result,
            stats=summary,
        )
    return result, summary


@dataclass
class LevelLibrary:
    """Indexed store of trained policies for levels 0..K.

    ``evaders[0]`` is the scripted heuristic; every other entry is trained.
    ``provenance`` records, per policy, the opponent it responded to, its
    training config hash, and its evaluation summary.
    """

    K: int
    evaders: list  # Policy per level
    pursuer_pairs: list  # (Policy, Policy) per level
    provenance: dict = field(default_factory=dict)
    reward: RewardSpec = field(default_factory=RewardSpec)
    config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = 0

    def pair(self, level: int) -> tuple[Policy, Policy]:
        return self.pursuer_pairs[level]

    def evader(self, level: int) -> Policy:
        return self.evaders[level]


def build_level_library(
    K: int,
    grid: GridMap,
    reward: RewardSpec,
    config: TrainConfig,
    seed: int,
    cross_play_episodes: int | None = None,
) -> LevelLibrary:
    """Alternating best-response construction of the level hierarchy.

    Level 0 evader is the scripted heuristic. For each level i: train the
    pursuer pair against evader i; then (while i < K) train evader i+1
    against that frozen pair. Finishes with a cross-play evaluation matrix
    stored in the library provenance.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    cfg_hash = config_hash({"config": config.to_dict(), "reward": reward.to_dict()})
    evaders = [make_heuristic_evader(config.level0_epsilon)]
    pairs = []
    provenance: dict = {"config_hash": cfg_hash, "seed": seed, "policies": {}}
    for i in range(K + 1):
        pair, summary = optimize_policy(
            PURSUER_PAIR, evaders[i], reward, config, _sub_seed(seed, 20, i), level=i, grid=grid
        )
        pairs.append(pair)
        provenance["policies"][f"pursuer_pair_{i}"] = {
            "opponent": evaders[i].identity(),
            "config_hash": cfg_hash,
            "eval": summary,
        }
        if i < K:
            evader, summary = optimize_policy(
                EVADER, pair, reward, config, _sub_seed(seed, 21, i), level=i + 1, grid=grid
            )
            evaders.append(evader)
            provenance["policies"][f"evader_{i + 1}"] = {
                "opponent": [pair[0].identity(), pair[1].identity()],
                "config_hash": cfg_hash,
                "eval": summary,
            }
    library = LevelLibrary(
        K=K, evaders=evaders, pursuer_pairs=pairs, provenance=provenance,
        reward=reward, config=config, seed=seed,
    )
    from .evaluation import cross_play  # late import; evaluation depends on rollout

    n_cross = cross_play_episodes if cross_play_episodes is not None else config.evaluation_episodes
    matrix = cross_play(grid, library, n_cross, _sub_seed(seed, 22))
    provenance["cross_play"] = matrix.to_dict()
    return library
