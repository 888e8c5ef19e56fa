"""Build a small best-response hierarchy and inspect the cross-play table.

Uses a reduced budget so it finishes in about a minute; the bundled
experiment defaults live in TrainConfig/RewardSpec.

Run: python demos/02_train_levels.py
"""

import pegrid
from pegrid.evaluation import cross_play
from pegrid.training import RewardSpec, TrainConfig, build_level_library

grid = pegrid.load_map(pegrid.default_map_text())

config = TrainConfig(
    episodes_per_iteration=1000,
    iterations=8,
    discount=0.99,
    evaluation_episodes=100,
    checkpoint_episodes=60,
)
reward = RewardSpec()

print("training: pursuer pair 0 -> evader 1 -> pursuer pair 1 ...")
library = build_level_library(1, grid, reward, config, seed=17, cross_play_episodes=30)

for name, entry in library.provenance["policies"].items():
    e = entry["eval"]
    print(f"  {name:16s} win rate {e['baseline_win_rate']:.2f} -> {e['win_rate']:.2f}")

# Cross-play: matched pursuers should beat mismatched ones on each evader.
matrix = cross_play(grid, library, n_per_cell=100, seed=99)
print()
print(matrix.text_table())
