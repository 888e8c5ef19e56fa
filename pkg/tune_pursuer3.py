# Scratch: long-budget battery for matched pursuer strength.
import sys
import time

import pegrid
from pegrid.errors import NoImprovementError
from pegrid.evaluation import compute_metrics
from pegrid.training import (
    PURSUER_PAIR, RewardSpec, TrainConfig, _sub_rng, _sub_seed, optimize_policy, rollout,
)
from pegrid.scenario import sample_scenario

g = pegrid.load_map(pegrid.default_map_text())
ev = pegrid.make_heuristic_evader()


def seen_eval(pair, rew, n=200, seed=77):
    logs = []
    for k in range(n):
        sc = sample_scenario(g, _sub_rng(seed, 3, k))
        logs.append(rollout(g, pair, ev, sc, _sub_seed(seed, 4, k), rew))
    return compute_metrics(logs)


configs = [
    ("A 96k g.99 cap20 b.09", TrainConfig(episodes_per_iteration=500, iterations=192, epsilon_end=0.02, discount=0.99), RewardSpec(capture=20, detection_bonus=0.09)),
    ("B 96k g.97 cap10 b.09", TrainConfig(episodes_per_iteration=500, iterations=192, epsilon_end=0.02), RewardSpec(detection_bonus=0.09)),
    ("C 48k g.99 cap20 b.09", TrainConfig(episodes_per_iteration=500, iterations=96, epsilon_end=0.02, discount=0.99), RewardSpec(capture=20, detection_bonus=0.09)),
    ("D 48k g.995 cap30 b.095 lr.15", TrainConfig(episodes_per_iteration=500, iterations=96, epsilon_end=0.02, discount=0.995, learning_rate=0.15), RewardSpec(capture=30, detection_bonus=0.095)),
]

for name, cfg, rew in configs:
    t0 = time.time()
    try:
        pair, s = optimize_policy(PURSUER_PAIR, ev, rew, cfg, seed=11, level=0, grid=g)
    except NoImprovementError as exc:
        s, pair = exc.stats, exc.policies
        s["FAILED"] = True
    dt = time.time() - t0
    m = seen_eval(pair, rew)
    print(
        f"{name:32s} {dt:6.1f}s win {s['baseline_win_rate']:.2f}->{s['win_rate']:.2f} "
        f"p={s['p_value']:.1g} | seen {m.evader_seen_rate:.2f} fov {m.time_in_fov:.2f}"
        + (" FAILED" if s.get("FAILED") else "")
    )
    sys.stdout.flush()
