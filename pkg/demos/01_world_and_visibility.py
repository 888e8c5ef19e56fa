"""Tour of the game world: maps, movement, occlusion, observations.

Run: python demos/01_world_and_visibility.py
"""

import numpy as np

import pegrid
from pegrid.policies import make_heuristic_evader, make_trained
from pegrid.render import render_frames
from pegrid.scenario import Scenario
from pegrid.training import rollout
from pegrid.visibility import ground_fov, hlp_fov, line_of_sight
from pegrid.world import Role

# The bundled 20x20 downtown map: '.' open streets, '#' buildings the
# ground agents cannot enter, '~' tree cover that hides cells from above.
grid = pegrid.load_map(pegrid.default_map_text())
print(pegrid.default_map_text())
print(f"{grid.width}x{grid.height}, {len(grid.accessible)} accessible cells\n")

# The high pursuer looks straight down: buildings show their rooftops, but
# foliage is opaque from above.
overhead = hlp_fov(grid, (10, 9), radius=4)
print(f"overhead view from (10,9): {len(overhead)} cells "
      f"(of {9 * 9} in the disc; the rest is under trees)")

# The low pursuer has a forward camera: a 90-degree sector blocked by
# buildings. Facing east from a street corner:
forward = ground_fov(grid, (5, 3), "E", radius=2)
print(f"ground view from (5,3) facing E: {sorted(forward)}")

# Buildings block sightlines; their front face is still visible.
print("can (5,3) see past the building at (6,4)?",
      line_of_sight(grid, (5, 3), (7, 5)))

# A short episode: scripted evader runs for its goal, untrained pursuers
# wander. The replay frames mark the team's current view with ':'.
pair = (make_trained(Role.HLP, 0, 1), make_trained(Role.LLP, 0, 2))
scenario = Scenario((10, 9), (9, 10), (3, 16), (16, 3), horizon=40)
log = rollout(grid, pair, make_heuristic_evader(), scenario, seed=7)
print(f"\nepisode ended {log.status.value} at t={log.final_t}")
for frame in render_frames(log, grid)[:3]:
    print(frame)
