"""Fields of view, occlusion, per-step observations, and team fusion.

Two sensing modes exist. The overhead view (HLP) covers a Chebyshev disc
and is blocked only by foliage: building rooftops are visible, cells under
tree cover are not. The ground view (LLP and evader) covers the forward
90-degree sector of a Chebyshev disc and is blocked by buildings along the
sightline; foliage never blocks ground sight, which is exactly what lets
the LLP find an evader the HLP cannot.

Per-map FOV tables are cached on the map object the first time they are
needed, which keeps rollouts cheap. All functions here are pure.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import NonContiguousTimestepError
from .world import AgentState, Cell, CellKind, EpisodeState, GridMap, Role

DEFAULT_HLP_RADIUS = 4
DEFAULT_GROUND_RADIUS = 2

# Quarter-plane sector tests per heading; boundary diagonals belong to the
# sector. dx grows east, dy grows south.
_SECTOR = {
    "E": lambda dx, dy: dx >= abs(dy),
    "W": lambda dx, dy: -dx >= abs(dy),
    "N": lambda dx, dy: -dy >= abs(dx),
    "S": lambda dx, dy: dy >= abs(dx),
}


def ray_cells(frm: Cell, to: Cell) -> list[Cell]:
    """Cells whose interior the center-to-center segment crosses.

    Supercover traversal with one deliberate difference: when the segment
    passes exactly through a lattice corner the walk steps diagonally, so
    cells touched only at that corner are not listed (corner contact does
    not occlude). Endpoints are included.
    """
    x, y = frm
    nx = abs(to[0] - frm[0])
    ny = abs(to[1] - frm[1])
    sx = 1 if to[0] > frm[0] else -1
    sy = 1 if to[1] > frm[1] else -1
    cells = [(x, y)]
    ix = iy = 0
    while ix < nx or iy < ny:
        if iy >= ny:
            x += sx
            ix += 1
        elif ix >= nx:
            y += sy
            iy += 1
        else:
            # Compare the segment parameters of the next vertical and
            # horizontal grid-line crossings: (ix+0.5)/nx vs (iy+0.5)/ny.
            decision = (1 + 2 * ix) * ny - (1 + 2 * iy) * nx
            if decision == 0:
                x += sx
                y += sy
                ix += 1
                iy += 1
            elif decision < 0:
                x += sx
                ix += 1
            else:
                y += sy
                iy += 1
        cells.append((x, y))
    return cells


def line_of_sight(grid: GridMap, frm: Cell, to: Cell) -> bool:
    """True when no building lies strictly between the two cells.

    Endpoints never block themselves: a building destination is visible
    (its facade), but nothing behind it is.
    """
    for cell in ray_cells(frm, to)[1:-1]:
        if grid.kind_at(cell) == CellKind.BUILDING:
            return False
    return True


def _hlp_table(grid: GridMap, radius: int) -> dict[Cell, tuple[frozenset, int]]:
    key = ("hlp", radius)
    table = grid._fov_caches.get(key)
    if table is None:
        table = {}
        grid._fov_caches[key] = table
    return table


def hlp_fov(grid: GridMap, position: Cell, radius: int = DEFAULT_HLP_RADIUS) -> frozenset:
    """Overhead view: Chebyshev disc minus foliage cells.

    Building cells are included (rooftops are visible from above) even
    though no ground agent can stand on them.
    """
    table = _hlp_table(grid, radius)
    hit = table.get(position)
    if hit is None:
        px, py = position
        cells = []
        bits = 0
        for y in range(max(0, py - radius), min(grid.height, py + radius + 1)):
            for x in range(max(0, px - radius), min(grid.width, px + radius + 1)):
                if grid.kind_at((x, y)) != CellKind.FOLIAGE:
                    cells.append((x, y))
                    if (x, y) in grid.accessible:
                        bits |= 1 << (y * grid.width + x)
        hit = (frozenset(cells), bits)
        table[position] = hit
    return hit[0]


def _ground_table(grid: GridMap, radius: int) -> dict[tuple[Cell, str], tuple[frozenset, int]]:
    key = ("ground", radius)
    table = grid._fov_caches.get(key)
    if table is None:
        table = {}
        grid._fov_caches[key] = table
    return table


def ground_fov(
    grid: GridMap,
    position: Cell,
    heading: str,
    radius: int = DEFAULT_GROUND_RADIUS,
) -> frozenset:
    """Forward-camera view from a ground cell.

    Cells within the Chebyshev radius, inside the quarter-plane sector of
    the heading (diagonal boundary included), with building-free line of
    sight. The observer's own cell is always visible. Foliage does not
    block ground sight.
    """
    table = _ground_table(grid, radius)
    hit = table.get((position, heading))
    if hit is None:
        px, py = position
        in_sector = _SECTOR[heading]
        cells = [position]
        for y in range(max(0, py - radius), min(grid.height, py + radius + 1)):
            for x in range(max(0, px - radius), min(grid.width, px + radius + 1)):
                if (x, y) == position or not in_sector(x - px, y - py):
                    continue
                if line_of_sight(grid, position, (x, y)):
                    cells.append((x, y))
        bits = 0
        for cell in cells:
            if cell in grid.accessible:
                bits |= 1 << (cell[1] * grid.width + cell[0])
        hit = (frozenset(cells), bits)
        table[(position, heading)] = hit
    return hit[0]


@dataclass(frozen=True)
class Observation:
    """What one agent sees at one timestep.

    ``detections`` lists every agent standing in a visible cell, the
    observer itself always included. ``explored_bits`` is the accessible
    subset of ``visible_cells`` as a bitmask over row-major cell indices,
    kept for cheap coverage accounting.
    """

    t: int
    observer: Role
    visible_cells: frozenset
    detections: tuple
    self_state: AgentState
    explored_bits: int = 0

    def detected_cell(self, role: Role) -> Cell | None:
        for r, cell in self.detections:
            if r == role:
                return cell
        return None


_ROLE_ORDER = {Role.HLP: 0, Role.LLP: 1, Role.EVADER: 2}


def make_observation(
    grid: GridMap,
    state: EpisodeState,
    observer: Role,
    hlp_radius: int = DEFAULT_HLP_RADIUS,
    ground_radius: int = DEFAULT_GROUND_RADIUS,
) -> Observation:
    """Compute one agent's observation of the current state.

    Overhead detection is kind-based: an agent on a foliage cell is hidden
    from the HLP even when adjacent open cells are visible. Ground
    detection is membership in the ground FOV, so foliage hides nobody at
    ground level. The evader never observes the HLP (different altitude);
    pursuers observe each other under the ordinary rules.
    """
    me = state.agent(observer)
    pos = me.position
    if observer == Role.HLP:
        fov = hlp_fov(grid, pos, hlp_radius)
        bits = _hlp_table(grid, hlp_radius)[pos][1]
        visible = fov if pos in fov else fov | {pos}
        if pos in grid.accessible:
            bits |= 1 << grid.cell_index(pos)
        candidates = ((Role.LLP, state.llp.position), (Role.EVADER, state.evader.position))
        detections = [(observer, pos)]
        for role, cell in candidates:
            if cell in fov:
                detections.append((role, cell))
    else:
        fov = ground_fov(grid, pos, me.heading, ground_radius)
        bits = _ground_table(grid, ground_radius)[(pos, me.heading)][1]
        visible = fov
        detections = []
        for role in (Role.HLP, Role.LLP, Role.EVADER):
            if role == observer:
                detections.append((role, pos))
                continue
            if observer == Role.EVADER and role == Role.HLP:
                continue
            cell = state.agent(role).position
            if cell in fov:
                detections.append((role, cell))
    detections.sort(key=lambda rc: _ROLE_ORDER[rc[0]])
    return Observation(
        t=state.t,
        observer=observer,
        visible_cells=visible,
        detections=tuple(detections),
        self_state=me,
        explored_bits=bits,
    )


@dataclass(frozen=True)
class TeamRecord:
    t: int
    hlp: Observation
    llp: Observation

    def evader_cell(self) -> Cell | None:
        """Fused evader detection for this step, overhead view first."""
        cell = self.hlp.detected_cell(Role.EVADER)
        if cell is None:
            cell = self.llp.detected_cell(Role.EVADER)
        return cell


@dataclass(frozen=True)
class TeamHistory:
    """Time-ordered fused record of both pursuers' observations.

    Lossless: each entry keeps both raw observations, so either member's
    view can be recovered. Entries are contiguous in t from 0.
    """

    entries: tuple = ()

    def last_t(self) -> int:
        return self.entries[-1].t if self.entries else -1

    def __len__(self):
        return len(self.entries)


def fuse_team_observations(
    history: TeamHistory, obs_h: Observation, obs_l: Observation
) -> TeamHistory:
    """Append one fused timestep; communication is instantaneous and lossless."""
    expected = history.last_t() + 1
    if obs_h.t != obs_l.t or obs_h.t != expected:
        raise NonContiguousTimestepError(
            f"expected t={expected}, got HLP t={obs_h.t}, LLP t={obs_l.t}"
        )
    return TeamHistory(history.entries + (TeamRecord(obs_h.t, obs_h, obs_l),))
