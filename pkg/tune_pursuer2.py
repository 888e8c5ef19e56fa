# Scratch: bigger budgets + alpha decay variants; report seen-rate too.
import sys
import time

import numpy as np
import pegrid
from pegrid.errors import NoImprovementError
from pegrid.scenario import sample_scenario
from pegrid.training import PURSUER_PAIR, RewardSpec, TrainConfig, optimize_policy, rollout, _sub_rng, _sub_seed
from pegrid.evaluation import compute_metrics

g = pegrid.load_map(pegrid.default_map_text())
ev = pegrid.make_heuristic_evader()


def seen_eval(pair, n=200, seed=77):
    logs = []
    for k in range(n):
        sc = sample_scenario(g, _sub_rng(seed, 3, k))
        logs.append(rollout(g, pair, ev, sc, _sub_seed(seed, 4, k)))
    m = compute_metrics(logs)
    return m


configs = [
    ("24k", TrainConfig(episodes_per_iteration=500, iterations=48, epsilon_end=0.02), RewardSpec(detection_bonus=0.09)),
    ("48k", TrainConfig(episodes_per_iteration=500, iterations=96, epsilon_end=0.02), RewardSpec(detection_bonus=0.09)),
]

for name, cfg, rew in configs:
    t0 = time.time()
    try:
        pair, s = optimize_policy(PURSUER_PAIR, ev, rew, cfg, seed=11, level=0, grid=g)
    except NoImprovementError as exc:
        s, pair = exc.stats, exc.policies
        s["FAILED"] = True
    dt = time.time() - t0
    m = seen_eval(pair)
    print(
        f"{name:6s} {dt:6.1f}s win {s['baseline_win_rate']:.2f}->{s['win_rate']:.2f} "
        f"ret {s['mean_return']:.2f} p={s['p_value']:.2g} | seen {m.evader_seen_rate:.2f} "
        f"fov {m.time_in_fov:.2f} first {m.first_seen_mean and round(m.first_seen_mean,1)}"
    )
    sys.stdout.flush()
