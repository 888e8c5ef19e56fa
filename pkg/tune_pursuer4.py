# Scratch: checkpointed training across seeds to gauge variance.
import sys
import time

import pegrid
from pegrid.errors import NoImprovementError
from pegrid.evaluation import compute_metrics
from pegrid.scenario import sample_scenario
from pegrid.training import (
    PURSUER_PAIR, RewardSpec, TrainConfig, _sub_rng, _sub_seed, optimize_policy, rollout,
)

g = pegrid.load_map(pegrid.default_map_text())
ev = pegrid.make_heuristic_evader()


def seen_eval(pair, rew, n=200, seed=77):
    logs = [
        rollout(g, pair, ev, sample_scenario(g, _sub_rng(seed, 3, k)), _sub_seed(seed, 4, k), rew)
        for k in range(n)
    ]
    return compute_metrics(logs)


cfg = TrainConfig(
    episodes_per_iteration=2000, iterations=32, epsilon_end=0.05,
    discount=0.99, checkpoint_episodes=80,
)
rew = RewardSpec(capture=20, detection_bonus=0.09)

for seed in (11, 12, 13):
    t0 = time.time()
    try:
        pair, s = optimize_policy(PURSUER_PAIR, ev, rew, cfg, seed=seed, level=0, grid=g)
    except NoImprovementError as exc:
        s, pair = exc.stats, exc.policies
        s["FAILED"] = True
    dt = time.time() - t0
    m = seen_eval(pair, rew)
    print(
        f"seed {seed} {dt:6.1f}s win {s['baseline_win_rate']:.2f}->{s['win_rate']:.2f} "
        f"p={s['p_value']:.1g} | seen {m.evader_seen_rate:.2f} fov {m.time_in_fov:.2f}"
        + (" FAILED" if s.get("FAILED") else "")
    )
    sys.stdout.flush()
