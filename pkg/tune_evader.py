# Scratch: isolate the evader training stage on the park map.
import sys
import time
from dataclasses import replace

import pegrid
from pegrid.errors import NoImprovementError
from pegrid.training import (
    EVADER, PURSUER_PAIR, RewardSpec, TrainConfig, _sub_seed, optimize_policy,
)

g = pegrid.load_map(pegrid.default_map_text())
rew = RewardSpec()
base = TrainConfig()  # 2000x32, eval 200

t0 = time.time()
pair, s = optimize_policy(
    PURSUER_PAIR, pegrid.make_heuristic_evader(), rew, base,
    seed=_sub_seed(11, 20, 0), level=0, grid=g,
)
print(f"P0: {time.time()-t0:.0f}s win {s['baseline_win_rate']:.2f}->{s['win_rate']:.2f} p={s['p_value']:.1g}", flush=True)

for label, cfg in (
    ("eval300", replace(base, evaluation_episodes=300)),
    ("eval300 it48", replace(base, evaluation_episodes=300, iterations=48)),
):
    t0 = time.time()
    try:
        ev1, s = optimize_policy(EVADER, pair, rew, cfg, seed=_sub_seed(11, 21, 0), level=1, grid=g)
        msg = f"ok win {s['baseline_win_rate']:.2f}->{s['win_rate']:.2f} ret {s['baseline_mean_return']:.2f}->{s['mean_return']:.2f} p={s['p_value']:.2g}"
    except NoImprovementError as e:
        msg = f"FAIL {e.stats['baseline_win_rate']:.2f}->{e.stats['win_rate']:.2f} ret {e.stats['baseline_mean_return']:.2f}->{e.stats['mean_return']:.2f} p={e.stats['p_value']:.2g}"
    print(f"E1 {label}: {time.time()-t0:.0f}s {msg}", flush=True)
