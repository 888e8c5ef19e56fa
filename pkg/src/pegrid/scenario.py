"""Episode placements: fixed scenarios and the random scenario sampler.

The standard sampler mirrors how experiments are run: both pursuers spawn
on the map's left edge, the evader's start and goal are drawn uniformly
over accessible cells subject to a minimum Chebyshev separation of half
the map width. Agents start facing east.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .visibility import DEFAULT_GROUND_RADIUS, DEFAULT_HLP_RADIUS
from .world import Cell, DEFAULT_HORIZON, EpisodeState, GridMap, chebyshev, initial_state


@dataclass(frozen=True)
class Scenario:
    """Concrete placement for one episode."""

    hlp_start: Cell
    llp_start: Cell
    evader_start: Cell
    evader_goal: Cell
    horizon: int = DEFAULT_HORIZON
    hlp_radius: int = DEFAULT_HLP_RADIUS
    ground_radius: int = DEFAULT_GROUND_RADIUS
    headings: tuple[str, str, str] = ("E", "E", "E")

    def start_state(self, grid: GridMap) -> EpisodeState:
        return initial_state(
            grid,
            self.hlp_start,
            self.llp_start,
            self.evader_start,
            self.evader_goal,
            horizon=self.horizon,
            headings=self.headings,
        )

    def to_dict(self) -> dict:
        return {
            "hlp_start": list(self.hlp_start),
            "llp_start": list(self.llp_start),
            "evader_start": list(self.evader_start),
            "evader_goal": list(self.evader_goal),
            "horizon": self.horizon,
            "hlp_radius": self.hlp_radius,
            "ground_radius": self.ground_radius,
            "headings": list(self.headings),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        return cls(
            hlp_start=tuple(d["hlp_start"]),
            llp_start=tuple(d["llp_start"]),
            evader_start=tuple(d["evader_start"]),
            evader_goal=tuple(d["evader_goal"]),
            horizon=d["horizon"],
            hlp_radius=d["hlp_radius"],
            ground_radius=d["ground_radius"],
            headings=tuple(d["headings"]),
        )


@dataclass(frozen=True)
class SamplerSpec:
    """Random-placement rules; separation defaults to half the map width.

    ``fixed_hlp``/``fixed_llp`` pin the pursuer spawns instead of drawing
    them from the edge column; ``evader_keepout`` keeps the evader's start
    and goal at least that Chebyshev distance from both pursuer spawns
    (used by the tiny frozen-opponent training instances).
    """

    min_separation: int | None = None  # evader start to goal, Chebyshev
    # "border": anywhere on the outer ring. "center": the central block.
    # "split": HLP central, LLP on the edge column. "edge": the edge column.
    pursuer_spawn: str = "border"
    pursuer_edge_col: int = 0
    fixed_hlp: tuple | None = None
    fixed_llp: tuple | None = None
    evader_keepout: int = 0
    horizon: int = DEFAULT_HORIZON
    hlp_radius: int = DEFAULT_HLP_RADIUS
    ground_radius: int = DEFAULT_GROUND_RADIUS

    def to_dict(self) -> dict:
        return {
            "min_separation": self.min_separation,
            "pursuer_spawn": self.pursuer_spawn,
            "pursuer_edge_col": self.pursuer_edge_col,
            "fixed_hlp": list(self.fixed_hlp) if self.fixed_hlp else None,
            "fixed_llp": list(self.fixed_llp) if self.fixed_llp else None,
            "evader_keepout": self.evader_keepout,
            "horizon": self.horizon,
            "hlp_radius": self.hlp_radius,
            "ground_radius": self.ground_radius,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplerSpec":
        d = dict(d)
        for key in ("fixed_hlp", "fixed_llp"):
            if d.get(key) is not None:
                d[key] = tuple(d[key])
        return cls(**d)


def _edge_cells(grid: GridMap, col: int) -> tuple[list[Cell], list[Cell]]:
    """(any-cell, accessible-cell) spawn candidates on a column, walking
    rightward from ``col`` until an accessible cell exists."""
    hlp_cells = [(col, y) for y in range(grid.height)]
    for c in range(col, grid.width):
        ground = [(c, y) for y in range(grid.height) if (c, y) in grid.accessible]
        if ground:
            return hlp_cells, ground
    raise ValueError("no accessible spawn column")  # unreachable on valid maps


def _border_cells(grid: GridMap) -> tuple[list[Cell], list[Cell]]:
    """Spawn candidates on the outer ring (any cell / accessible cells)."""
    w, h = grid.width, grid.height
    ring = sorted(
        {(x, y) for x in range(w) for y in (0, h - 1)}
        | {(x, y) for x in (0, w - 1) for y in range(h)}
    )
    ground = [c for c in ring if c in grid.accessible]
    if not ground:  # degenerate walled border; fall back to any accessible
        ground = sorted(grid.accessible)
    return ring, ground


def _center_cells(grid: GridMap) -> tuple[list[Cell], list[Cell]]:
    """Spawn candidates in the central block (quarter of each dimension,
    at least 2x2), widened until it contains an accessible cell."""
    w, h = grid.width, grid.height
    half_w = max(1, w // 8)
    half_h = max(1, h // 8)
    while True:
        x0, x1 = w // 2 - half_w, w // 2 + half_w
        y0, y1 = h // 2 - half_h, h // 2 + half_h
        block = [
            (x, y)
            for x in range(max(0, x0), min(w, x1))
            for y in range(max(0, y0), min(h, y1))
        ]
        ground = [c for c in block if c in grid.accessible]
        if ground:
            return block, ground
        half_w += 1
        half_h += 1


def sample_scenario(grid: GridMap, rng, spec: SamplerSpec = SamplerSpec()) -> Scenario:
    """Draw one scenario; deterministic given the RNG state."""
    sep = spec.min_separation if spec.min_separation is not None else grid.width // 2
    if spec.pursuer_spawn == "border":
        hlp_cells, llp_cells = _border_cells(grid)
    elif spec.pursuer_spawn == "center":
        hlp_cells, llp_cells = _center_cells(grid)
    elif spec.pursuer_spawn == "split":
        hlp_cells, _ = _center_cells(grid)
        _, llp_cells = _edge_cells(grid, spec.pursuer_edge_col)
    else:
        hlp_cells, llp_cells = _edge_cells(grid, spec.pursuer_edge_col)
    accessible = sorted(grid.accessible)
    hlp = spec.fixed_hlp or hlp_cells[int(rng.integers(len(hlp_cells)))]
    llp = spec.fixed_llp or llp_cells[int(rng.integers(len(llp_cells)))]

    def clear(cell):
        return (
            chebyshev(cell, hlp) >= spec.evader_keepout
            and chebyshev(cell, llp) >= spec.evader_keepout
        )

    pool = [c for c in accessible if clear(c)] or accessible
    start = pool[int(rng.integers(len(pool)))]
    candidates = [c for c in pool if chebyshev(c, start) >= sep]
    while not candidates:
        # Degenerate separation for this start (tiny maps): resample the
        # start, relaxing the separation whenever a full retry round fails.
        for _ in range(8):
            start = pool[int(rng.integers(len(pool)))]
            candidates = [c for c in pool if chebyshev(c, start) >= sep]
            if candidates:
                break
        else:
            sep -= 1
            if sep < 1:
                candidates = [c for c in pool if c != start]
    goal = candidates[int(rng.integers(len(candidates)))]
    return Scenario(
        hlp_start=hlp,
        llp_start=llp,
        evader_start=start,
        evader_goal=goal,
        horizon=spec.horizon,
        hlp_radius=spec.hlp_radius,
        ground_radius=spec.ground_radius,
    )
