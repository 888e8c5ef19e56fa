"""Grid map, agent kinematics, and the episode state machine.

The game is played on a rectangular cell grid. Cells are addressed as
``(col, row)`` with row 0 at the top of the map document, so ``MoveN``
decreases the row index. Three agents move simultaneously, one cell per
timestep:

* ``HLP``  -- high-altitude pursuer, flies over every cell kind.
* ``LLP``  -- low-altitude pursuer, restricted to accessible cells; the
  only agent that can intercept the evader.
* ``EVADER`` -- travels from its start cell to a goal cell.

Cell kinds impose the access/visibility asymmetry: buildings are
inaccessible to ground agents and block ground sightlines; foliage is
accessible and only hides its cell from the overhead view.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum, IntEnum

from .errors import (
    DisconnectedMapError,
    EpisodeFinishedError,
    InvalidActionError,
    MalformedMapError,
)

Cell = tuple[int, int]

DEFAULT_HORIZON = 100


class CellKind(IntEnum):
    OPEN = 0
    BUILDING = 1
    FOLIAGE = 2


GLYPHS = {".": CellKind.OPEN, "#": CellKind.BUILDING, "~": CellKind.FOLIAGE}
KIND_GLYPHS = {v: k for k, v in GLYPHS.items()}


class Role(str, Enum):
    HLP = "HLP"
    LLP = "LLP"
    EVADER = "EVADER"


class Action(str, Enum):
    MOVE_N = "N"
    MOVE_S = "S"
    MOVE_E = "E"
    MOVE_W = "W"
    STAY = "STAY"


# Fixed order used for deterministic tie-breaking everywhere.
ACTIONS = (Action.MOVE_N, Action.MOVE_S, Action.MOVE_E, Action.MOVE_W, Action.STAY)
ACTION_INDEX = {a: i for i, a in enumerate(ACTIONS)}

DELTAS = {
    Action.MOVE_N: (0, -1),
    Action.MOVE_S: (0, 1),
    Action.MOVE_E: (1, 0),
    Action.MOVE_W: (-1, 0),
    Action.STAY: (0, 0),
}

# Heading strings follow the move that produced them; STAY keeps the old one.
HEADINGS = ("N", "S", "E", "W")


class Status(str, Enum):
    RUNNING = "Running"
    PURSUER_WIN = "PursuerWin"
    EVADER_WIN = "EvaderWin"
    TIMEOUT = "Timeout"


class GridMap:
    """Immutable rectangular grid of cell kinds.

    Construct via :func:`load_map`; the constructor assumes already-validated
    kinds. Visibility caches are attached lazily by the visibility module and
    never change observable map state.
    """

    __slots__ = ("width", "height", "_kinds", "accessible", "text", "_fov_caches")

    def __init__(self, width: int, height: int, kinds: tuple[CellKind, ...], text: str):
        self.width = width
        self.height = height
        self._kinds = kinds
        self.text = text
        self.accessible = frozenset(
            (x, y)
            for y in range(height)
            for x in range(width)
            if kinds[y * width + x] != CellKind.BUILDING
        )
        self._fov_caches: dict = {}

    def in_bounds(self, cell: Cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def kind_at(self, cell: Cell) -> CellKind:
        x, y = cell
        return self._kinds[y * self.width + x]

    def is_accessible(self, cell: Cell) -> bool:
        return cell in self.accessible

    def cell_index(self, cell: Cell) -> int:
        return cell[1] * self.width + cell[0]

    def __eq__(self, other):
        return isinstance(other, GridMap) and self.text == other.text

    def __hash__(self):
        return hash(self.text)

    def __repr__(self):
        return f"GridMap({self.width}x{self.height})"


def load_map(text: str) -> GridMap:
    """Parse an ASCII map document and verify its invariants.

    One row per line: ``.`` open, ``#`` building, ``~`` foliage. Rows must be
    equal length with no trailing whitespace; the accessible region (open and
    foliage cells) must be 4-connected and the grid at least 2x2.
    """
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines = lines[:-1]
    if not lines:
        raise MalformedMapError("empty map document")
    width = len(lines[0])
    kinds: list[CellKind] = []
    for y, line in enumerate(lines):
        if len(line) != width:
            raise MalformedMapError(f"ragged row {y}: length {len(line)} != {width}")
        if line != line.rstrip():
            raise MalformedMapError(f"trailing whitespace on row {y}")
        for x, glyph in enumerate(line):
            kind = GLYPHS.get(glyph)
            if kind is None:
                raise MalformedMapError(f"unknown glyph {glyph!r} at ({x},{y})")
            kinds.append(kind)
    height = len(lines)
    if width < 2 or height < 2:
        raise MalformedMapError(f"map must be at least 2x2, got {width}x{height}")
    grid = GridMap(width, height, tuple(kinds), "\n".join(lines) + "\n")
    _check_connected(grid)
    return grid


def _check_connected(grid: GridMap) -> None:
    """Flood fill from one accessible cell; all must be reached."""
    accessible = grid.accessible
    if not accessible:
        raise DisconnectedMapError("map has no accessible cells")
    start = min(accessible)
    seen = {start}
    frontier = [start]
    while frontier:
        x, y = frontier.pop()
        for nxt in ((x, y - 1), (x, y + 1), (x + 1, y), (x - 1, y)):
            if nxt in accessible and nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    if len(seen) != len(accessible):
        raise DisconnectedMapError(
            f"accessible region not 4-connected ({len(seen)} of {len(accessible)} reachable)"
        )


@dataclass(frozen=True)
class AgentState:
    role: Role
    position: Cell
    heading: str = "E"


@dataclass(frozen=True)
class EpisodeState:
    grid: GridMap
    hlp: AgentState
    llp: AgentState
    evader: AgentState
    evader_goal: Cell
    t: int = 0
    status: Status = Status.RUNNING

    def agent(self, role: Role) -> AgentState:
        if role == Role.HLP:
            return self.hlp
        if role == Role.LLP:
            return self.llp
        return self.evader


@dataclass(frozen=True)
class JointAction:
    hlp: Action
    llp: Action
    evader: Action


def valid_actions(grid: GridMap, agent: AgentState) -> set[Action]:
    """Actions the agent may take from its current cell.

    Stay is always legal. Moves must land on the map; ground agents (LLP and
    evader) additionally need an accessible destination. The HLP ignores
    obstacles but may not leave the map.
    """
    x, y = agent.position
    out = {Action.STAY}
    ground = agent.role != Role.HLP
    for action in ACTIONS[:4]:
        dx, dy = DELTAS[action]
        dest = (x + dx, y + dy)
        if not grid.in_bounds(dest):
            continue
        if ground and not grid.is_accessible(dest):
            continue
        out.add(action)
    return out


def chebyshev(a: Cell, b: Cell) -> int:
    return max(abs(a[0] - b[0]), abs(a[1] - b[1]))


def check_terminal(state: EpisodeState, horizon: int = DEFAULT_HORIZON) -> Status:
    """Evaluate terminal predicates on a state.

    Capture (LLP within Chebyshev distance 1 of the evader) takes precedence
    over goal arrival; timeout at ``t >= horizon`` counts as evader success
    for win-rate purposes but is reported as its own status.
    """
    if chebyshev(state.llp.position, state.evader.position) <= 1:
        return Status.PURSUER_WIN
    if state.evader.position == state.evader_goal:
        return Status.EVADER_WIN
    if state.t >= horizon:
        return Status.TIMEOUT
    return Status.RUNNING


def _moved(agent: AgentState, action: Action, grid: GridMap) -> AgentState:
    if action == Action.STAY:
        return agent
    dx, dy = DELTAS[action]
    pos = (agent.position[0] + dx, agent.position[1] + dy)
    return AgentState(agent.role, pos, action.value)


def step(
    state: EpisodeState, action: JointAction, horizon: int = DEFAULT_HORIZON
) -> EpisodeState:
    """Advance the game one timestep with simultaneous moves.

    All three destination cells are computed from the pre-move state, so the
    order in which agents are processed cannot matter. An LLP/evader cell
    swap counts as capture (the paths cross). Pure function: returns a new
    state, never mutates.
    """
    if state.status != Status.RUNNING:
        raise EpisodeFinishedError(f"episode already terminal ({state.status.value})")
    for role, act in (
        (Role.HLP, action.hlp),
        (Role.LLP, action.llp),
        (Role.EVADER, action.evader),
    ):
        if act not in valid_actions(state.grid, state.agent(role)):
            raise InvalidActionError(role, act)

    llp_old, evader_old = state.llp.position, state.evader.position
    nxt = replace(
        state,
        hlp=_moved(state.hlp, action.hlp, state.grid),
        llp=_moved(state.llp, action.llp, state.grid),
        evader=_moved(state.evader, action.evader, state.grid),
        t=state.t + 1,
    )
    swap = nxt.llp.position == evader_old and nxt.evader.position == llp_old
    status = Status.PURSUER_WIN if swap else check_terminal(nxt, horizon)
    return replace(nxt, status=status)


def initial_state(
    grid: GridMap,
    hlp_start: Cell,
    llp_start: Cell,
    evader_start: Cell,
    evader_goal: Cell,
    horizon: int = DEFAULT_HORIZON,
    headings: tuple[str, str, str] = ("E", "E", "E"),
) -> EpisodeState:
    """Build and validate the t=0 state; terminal rules apply immediately.

    Spawning the LLP adjacent to the evader therefore yields an episode that
    is already won by the pursuers.
    """
    if not grid.in_bounds(hlp_start):
        raise InvalidActionError(Role.HLP, None, f"HLP start {hlp_start} off map")
    for role, cell in ((Role.LLP, llp_start), (Role.EVADER, evader_start)):
        if not grid.is_accessible(cell):
            raise InvalidActionError(role, None, f"{role.value} start {cell} not accessible")
    if not grid.is_accessible(evader_goal):
        raise InvalidActionError(Role.EVADER, None, f"goal {evader_goal} not accessible")
    if evader_goal == evader_start:
        raise InvalidActionError(Role.EVADER, None, "goal equals evader start")
    state = EpisodeState(
        grid=grid,
        hlp=AgentState(Role.HLP, hlp_start, headings[0]),
        llp=AgentState(Role.LLP, llp_start, headings[1]),
        evader=AgentState(Role.EVADER, evader_start, headings[2]),
        evader_goal=evader_goal,
    )
    return replace(state, status=check_terminal(state, horizon))
