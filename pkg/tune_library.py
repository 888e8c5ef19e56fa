# Scratch: full K=1 library build + cross-play gaps, the acceptance-4 shape.
import sys
import time

import pegrid
from pegrid.evaluation import cross_play
from pegrid.training import RewardSpec, TrainConfig, build_level_library

g = pegrid.load_map(pegrid.default_map_text())
cfg = TrainConfig(
    episodes_per_iteration=2000, iterations=32, epsilon_end=0.05,
    discount=0.99, checkpoint_episodes=80,
)
rew = RewardSpec(capture=20, detection_bonus=0.09)

seed = int(sys.argv[1]) if len(sys.argv) > 1 else 11
t0 = time.time()
lib = build_level_library(1, g, rew, cfg, seed=seed, cross_play_episodes=50)
build_t = time.time() - t0
for name, p in lib.provenance["policies"].items():
    e = p["eval"]
    print(f"{name:16s} win {e['baseline_win_rate']:.2f}->{e['win_rate']:.2f} p={e['p_value']:.1g}")

t0 = time.time()
matrix = cross_play(g, lib, 200, seed=909)
print(f"build {build_t:.0f}s, matrix {time.time()-t0:.0f}s")
print(matrix.text_table())
w = {k: m.pursuer_win_rate for k, m in matrix.offline.items()}
print(f"gap on E0: {w[(0,0)]:.2f} - {w[(1,0)]:.2f} = {(w[(0,0)]-w[(1,0)])*100:.0f} pts")
print(f"gap on E1: {w[(1,1)]:.2f} - {w[(0,1)]:.2f} = {(w[(1,1)]-w[(0,1)])*100:.0f} pts")
