"""Shortest paths over accessible cells (4-adjacency, unit cost).

Used by the scripted evader and by feature extraction. Tie-breaking is
lexicographic on cells so every result is deterministic.
"""

from __future__ import annotations

from heapq import heappop, heappush

from .errors import NoPathToGoalError
from .world import Cell, GridMap

_NEIGHBOR_OFFSETS = ((0, -1), (0, 1), (1, 0), (-1, 0))  # N, S, E, W order


def _neighbors(grid: GridMap, cell: Cell):
    x, y = cell
    for dx, dy in _NEIGHBOR_OFFSETS:
        nxt = (x + dx, y + dy)
        if nxt in grid.accessible:
            yield nxt


def distance_field(grid: GridMap, goal: Cell) -> dict[Cell, int]:
    """BFS distances from every accessible cell to ``goal``.

    Cached on the map; connectivity is guaranteed at load time so every
    accessible cell has a finite distance.
    """
    key = ("dist", goal)
    field = grid._fov_caches.get(key)
    if field is None:
        field = {goal: 0}
        frontier = [goal]
        while frontier:
            nxt_frontier = []
            for cell in frontier:
                d = field[cell]
                for nb in _neighbors(grid, cell):
                    if nb not in field:
                        field[nb] = d + 1
                        nxt_frontier.append(nb)
            frontier = nxt_frontier
        grid._fov_caches[key] = field
    return field


def astar(
    grid: GridMap,
    start: Cell,
    goal: Cell,
    extra_cost: dict[Cell, float] | None = None,
) -> list[Cell]:
    """Cheapest path from start to goal, inclusive of both.

    ``extra_cost`` adds a surcharge for entering particular cells, which is
    how the scripted evader detours around a pursuer. With no surcharge
    this is plain shortest path.
    """
    if start == goal:
        return [start]
    extra = extra_cost or {}
    g = {start: 0.0}
    came: dict[Cell, Cell] = {}
    h0 = abs(start[0] - goal[0]) + abs(start[1] - goal[1])
    open_heap = [(float(h0), 0.0, start)]
    closed = set()
    while open_heap:
        _, g_cur, cur = heappop(open_heap)
        if cur == goal:
            path = [cur]
            while cur != start:
                cur = came[cur]
                path.append(cur)
            path.reverse()
            return path
        if cur in closed:
            continue
        closed.add(cur)
        for nb in _neighbors(grid, cur):
            ng = g_cur + 1.0 + extra.get(nb, 0.0)
            if ng < g.get(nb, float("inf")):
                g[nb] = ng
                came[nb] = cur
                h = abs(nb[0] - goal[0]) + abs(nb[1] - goal[1])
                heappush(open_heap, (ng + h, ng, nb))
    raise NoPathToGoalError(f"no path {start} -> {goal}; map should be connected")
