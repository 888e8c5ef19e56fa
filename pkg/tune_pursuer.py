# Scratch tuning harness (not part of the package): probe pursuer training
# strength vs the scripted evader under different budgets/shaping.
import sys
import time

import pegrid
from pegrid.errors import NoImprovementError
from pegrid.training import PURSUER_PAIR, RewardSpec, TrainConfig, optimize_policy

g = pegrid.load_map(pegrid.default_map_text())
ev = pegrid.make_heuristic_evader()

configs = [
    ("6k eps, bonus .05", TrainConfig(episodes_per_iteration=500, iterations=12), RewardSpec()),
    ("6k eps, bonus .09", TrainConfig(episodes_per_iteration=500, iterations=12), RewardSpec(detection_bonus=0.09)),
    ("12k eps, bonus .05", TrainConfig(episodes_per_iteration=500, iterations=24), RewardSpec()),
    ("12k eps, bonus .09, eps_end .02", TrainConfig(episodes_per_iteration=500, iterations=24, epsilon_end=0.02), RewardSpec(detection_bonus=0.09)),
]

for name, cfg, rew in configs:
    t0 = time.time()
    try:
        pair, s = optimize_policy(PURSUER_PAIR, ev, rew, cfg, seed=11, level=0, grid=g)
    except NoImprovementError as exc:
        s = exc.stats
        s["FAILED"] = True
    dt = time.time() - t0
    print(
        f"{name:34s} {dt:6.1f}s win {s['baseline_win_rate']:.2f}->{s['win_rate']:.2f} "
        f"return {s['baseline_mean_return']:.2f}->{s['mean_return']:.2f} p={s['p_value']:.2g}"
        + (" FAILED" if s.get("FAILED") else "")
    )
    sys.stdout.flush()
