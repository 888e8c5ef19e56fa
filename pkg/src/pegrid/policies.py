"""History summaries and the policies that act on them.

Raw observation histories are folded into a fixed ``BeliefFeatures``
summary: where the opponent was last seen and how stale that sighting is,
how much of the map the side has covered, and (evader side) where its goal
lies. Policies score the five actions from that summary. Two kinds exist:

* ``heuristic`` -- the fixed level-0 evader: shortest path to goal with a
  small uniform-random action rate and a detour rule around a recently
  seen pursuer.
* ``trained``  -- a sparse action-value table over discretized features,
  produced by the training module. Rows for never-visited states are
  derived deterministically from the policy seed, so an untrained policy
  is a well-defined uniform-random-parameter policy.

Everything is deterministic given the inputs and the RNG state.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from typing import Sequence

from .errors import EmptyHistoryError
from .pathing import astar, distance_field
from .visibility import Observation, TeamHistory
from .world import (
    ACTION_INDEX,
    ACTIONS,
    DEFAULT_HORIZON,
    DELTAS,
    Action,
    Cell,
    CellKind,
    GridMap,
    Role,
    chebyshev,
)

# Version tag covering every discretization choice below; persisted policies
# refuse to load against a different schema.
FEATURE_SCHEMA = "belief-v7:stale(0,2,5)|chase-step|pos4x4|phase(8,20,45)|goaldist(2,5,10)|proj6-lead"


def feature_schema_hash() -> str:
    return hashlib.sha256(FEATURE_SCHEMA.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class BeliefFeatures:
    """Fixed-size summary of one side's history at time t.

    Team side: both pursuer states (known to each other by communication),
    the fused last evader sighting, and team map coverage. Evader side: own
    state, goal-route fields, and the last LLP sighting (the high pursuer
    is never visible from the ground).

    ``staleness`` is steps since the side last saw its opponent,
    ``horizon + 1`` when it never has.
    """

    t: int
    horizon: int
    side: str  # "team" | "evader"
    explored_fraction: float
    staleness: int
    # team side
    hlp_pos: Cell | None = None
    hlp_heading: str | None = None
    llp_pos: Cell | None = None
    llp_heading: str | None = None
    last_known_evader_cell: Cell | None = None
    # per-step drift between the two most recent sightings, when they are
    # close enough in time to be meaningful
    last_seen_velocity: tuple[float, float] | None = None
    # fraction of timesteps so far with a team sighting: the opponent's
    # observable signature (runners are tracked, hiders barely glimpsed)
    detection_rate: float = 0.0
    # evader side
    self_pos: Cell | None = None
    self_heading: str | None = None
    self_cell_kind: CellKind | None = None
    evader_goal: Cell | None = None
    dist_to_goal: int | None = None
    goal_step: Action | None = None
    last_known_pursuer_cell: Cell | None = None


MAX_VELOCITY_GAP = 4  # sightings further apart carry no useful drift


class TeamBelief:
    """Incremental builder for team-side features; one instance per episode."""

    __slots__ = (
        "grid", "horizon", "explored_bits", "last_known", "last_seen_t",
        "prev_known", "prev_seen_t", "detections", "steps", "_accessible",
    )

    def __init__(self, grid: GridMap, horizon: int = DEFAULT_HORIZON):
        self.grid = grid
        self.horizon = horizon
        self.explored_bits = 0
        self.last_known: Cell | None = None
        self.last_seen_t = -1
        self.prev_known: Cell | None = None
        self.prev_seen_t = -1
        self.detections = 0
        self.steps = 0
        self._accessible = len(grid.accessible)

    def consume(self, record) -> None:
        self.explored_bits |= record.hlp.explored_bits | record.llp.explored_bits
        self.steps += 1
        cell = record.evader_cell()
        if cell is not None:
            self.detections += 1
            self.prev_known, self.prev_seen_t = self.last_known, self.last_seen_t
            self.last_known = cell
            self.last_seen_t = record.t

    def _velocity(self) -> tuple[float, float] | None:
        if self.prev_known is None:
            return None
        gap = self.last_seen_t - self.prev_seen_t
        if not (0 < gap <= MAX_VELOCITY_GAP):
            return None
        return (
            (self.last_known[0] - self.prev_known[0]) / gap,
            (self.last_known[1] - self.prev_known[1]) / gap,
        )

    def snapshot(self, record) -> BeliefFeatures:
        t = record.t
        if self.last_seen_t < 0:
            staleness = self.horizon + 1
        else:
            staleness = min(t - self.last_seen_t, self.horizon + 1)
        hlp = record.hlp.self_state
        llp = record.llp.self_state
        return BeliefFeatures(
            t=t,
            horizon=self.horizon,
            side="team",
            explored_fraction=self.explored_bits.bit_count() / self._accessible,
            staleness=staleness,
            hlp_pos=hlp.position,
            hlp_heading=hlp.heading,
            llp_pos=llp.position,
            llp_heading=llp.heading,
            last_known_evader_cell=self.last_known,
            last_seen_velocity=self._velocity(),
            detection_rate=self.detections / self.steps,
        )


class EvaderBelief:
    """Incremental builder for evader-side features."""

    __slots__ = ("grid", "horizon", "goal", "explored_bits", "last_known", "last_seen_t", "_accessible")

    def __init__(self, grid: GridMap, goal: Cell, horizon: int = DEFAULT_HORIZON):
        self.grid = grid
        self.horizon = horizon
        self.goal = goal
        self.explored_bits = 0
        self.last_known: Cell | None = None
        self.last_seen_t = -1
        self._accessible = len(grid.accessible)

    def consume(self, obs: Observation) -> None:
        self.explored_bits |= obs.explored_bits
        cell = obs.detected_cell(Role.LLP)
        if cell is not None:
            self.last_known = cell
            self.last_seen_t = obs.t

    def snapshot(self, obs: Observation) -> BeliefFeatures:
        t = obs.t
        if self.last_seen_t < 0:
            staleness = self.horizon + 1
        else:
            staleness = min(t - self.last_seen_t, self.horizon + 1)
        pos = obs.self_state.position
        dist = distance_field(self.grid, self.goal).get(pos)
        return BeliefFeatures(
            t=t,
            horizon=self.horizon,
            side="evader",
            explored_fraction=self.explored_bits.bit_count() / self._accessible,
            staleness=staleness,
            self_pos=pos,
            self_heading=obs.self_state.heading,
            self_cell_kind=self.grid.kind_at(pos),
            evader_goal=self.goal,
            dist_to_goal=dist,
            goal_step=next_step_to_goal(self.grid, pos, self.goal),
            last_known_pursuer_cell=self.last_known,
        )


def summarize_history(
    history,
    grid: GridMap,
    evader_goal: Cell | None = None,
    horizon: int = DEFAULT_HORIZON,
) -> BeliefFeatures:
    """Fold a full history into features at its final timestep.

    Accepts a :class:`TeamHistory` (team side) or a sequence of the
    evader's own observations (evader side; requires ``evader_goal``).
    Prefix-consistent: the result depends only on entries up to the final t.
    """
    if isinstance(history, TeamHistory):
        if not history.entries:
            raise EmptyHistoryError("team history is empty")
        acc = TeamBelief(grid, horizon)
        for record in history.entries:
            acc.consume(record)
        return acc.snapshot(history.entries[-1])
    observations: Sequence[Observation] = history
    if not observations:
        raise EmptyHistoryError("evader history is empty")
    if evader_goal is None:
        raise ValueError("evader-side summary requires evader_goal")
    acc = EvaderBelief(grid, evader_goal, horizon)
    for obs in observations:
        acc.consume(obs)
    return acc.snapshot(observations[-1])


def next_step_to_goal(grid: GridMap, pos: Cell, goal: Cell) -> Action | None:
    """First move of a shortest path, ties broken in fixed action order."""
    if pos == goal:
        return None
    dist = distance_field(grid, goal)
    best = None
    best_d = dist[pos]
    for action in ACTIONS[:4]:
        dx, dy = DELTAS[action]
        nb = (pos[0] + dx, pos[1] + dy)
        d = dist.get(nb)
        if d is not None and d < best_d:
            best, best_d = action, d
    return best


# --- discretization -------------------------------------------------------

_STALE_EDGES = (0, 2, 5)  # buckets: 0 / 1-2 / 3-5 / 6+
_DIST_EDGES = (2, 5, 10)
_CHASE_DIST_EDGES = (1, 3, 7)  # capture range / close / mid / far
_PHASE_EDGES = (8, 20, 45)  # opening / early / mid / endgame of an episode


def _phase_bucket(t: int) -> int:
    for i, edge in enumerate(_PHASE_EDGES):
        if t <= edge:
            return i
    return len(_PHASE_EDGES)


def _stale_bucket(staleness: int) -> int:
    for i, edge in enumerate(_STALE_EDGES):
        if staleness <= edge:
            return i
    return len(_STALE_EDGES)


def _bucket(value: int, edges: tuple) -> int:
    for i, edge in enumerate(edges):
        if value <= edge:
            return i
    return len(edges)


def _pos_bucket(grid: GridMap, cell: Cell) -> tuple[int, int]:
    return (4 * cell[0]) // grid.width, (4 * cell[1]) // grid.height


def _explored_quartile(fraction: float) -> int:
    return min(3, int(fraction * 4))


MAX_PROJECTION = 6  # never extrapolate a sighting further than this


def _clamped_projection(c: Cell, v: tuple[float, float], dt: int, grid: GridMap) -> Cell:
    ox = max(-MAX_PROJECTION, min(MAX_PROJECTION, round(v[0] * dt)))
    oy = max(-MAX_PROJECTION, min(MAX_PROJECTION, round(v[1] * dt)))
    return (
        max(0, min(grid.width - 1, c[0] + ox)),
        max(0, min(grid.height - 1, c[1] + oy)),
    )


def projected_evader_cell(
    f: BeliefFeatures, self_pos: Cell, grid: GridMap, lead: bool
) -> Cell | None:
    """Best guess of the evader's cell from the last sighting and drift.

    Projects the sighting forward by its staleness; with ``lead`` the
    pursuer's own travel time to that point is added once, yielding an
    interception aim rather than a tail-chase aim.
    """
    c = f.last_known_evader_cell
    if c is None:
        return None
    v = f.last_seen_velocity
    if v is None:
        return c
    dt = f.staleness
    if lead:
        now = _clamped_projection(c, v, dt, grid)
        dt += chebyshev(self_pos, now)
    return _clamped_projection(c, v, dt, grid)


def _chase_pointer_air(pos: Cell, aim: Cell | None) -> tuple:
    """(sign direction, distance bucket) toward an aim, straight-line."""
    if aim is None:
        return ("-", 9)
    sx = (aim[0] > pos[0]) - (aim[0] < pos[0])
    sy = (aim[1] > pos[1]) - (aim[1] < pos[1])
    return ((sx, sy), _bucket(chebyshev(pos, aim), _CHASE_DIST_EDGES))


def _chase_pointer_ground(grid: GridMap, pos: Cell, aim: Cell | None) -> tuple:
    """(next route step, route distance bucket) toward an aim, obstacle-aware."""
    if aim is None:
        return ("-", 9)
    field = distance_field(grid, aim)
    dist = field.get(pos)
    if dist is None:  # aim is walled off; fall back to straight-line sense
        return ("-", 9)
    best = None
    best_d = dist
    for action in ACTIONS[:4]:
        dx, dy = DELTAS[action]
        nb = (pos[0] + dx, pos[1] + dy)
        d = field.get(nb)
        if d is not None and d < best_d:
            best, best_d = action, d
    return (best.value if best else "0", _bucket(dist, _CHASE_DIST_EDGES))


def state_key(role: Role, f: BeliefFeatures, grid: GridMap) -> tuple:
    """Discretized table key for a trained policy of the given role."""
    if role == Role.HLP:
        aim = projected_evader_cell(f, f.hlp_pos, grid, lead=False)
        pointer = _chase_pointer_air(f.hlp_pos, aim)
        return ("H", pointer, _stale_bucket(f.staleness), _pos_bucket(grid, f.hlp_pos),
                _phase_bucket(f.t))
    if role == Role.LLP:
        aim = projected_evader_cell(f, f.llp_pos, grid, lead=True)
        pointer = _chase_pointer_ground(grid, f.llp_pos, aim)
        return ("L", pointer, _stale_bucket(f.staleness), _pos_bucket(grid, f.llp_pos),
                f.llp_heading, _phase_bucket(f.t))
    rel = None
    if f.last_known_pursuer_cell is not None:
        dx = f.last_known_pursuer_cell[0] - f.self_pos[0]
        dy = f.last_known_pursuer_cell[1] - f.self_pos[1]
        rel = (
            ((dx > 0) - (dx < 0)) * (1 if abs(dx) <= 2 else 2),
            ((dy > 0) - (dy < 0)) * (1 if abs(dy) <= 2 else 2),
        )
    return ("E", f.goal_step.value if f.goal_step else "-", rel,
            _stale_bucket(f.staleness), int(f.self_cell_kind == CellKind.FOLIAGE),
            _bucket(f.dist_to_goal, _DIST_EDGES), _pos_bucket(grid, f.self_pos))


# --- policies -------------------------------------------------------------

HEURISTIC = "heuristic"
TRAINED = "trained"
SCRIPTED = "scripted"  # constant action; frozen opponents in tests and demos


@dataclass
class Policy:
    """One agent's policy: a scripted rule or a sparse action-value table.

    ``params`` maps state keys to lists of five action values in fixed
    action order. Missing rows fall back to a deterministic pseudo-random
    initialization derived from ``seed`` and the key, so evaluation never
    mutates the table.
    """

    role: Role
    level: int
    kind: str
    seed: int = 0
    epsilon0: float = 0.1  # heuristic evader's random-action rate
    fixed_action: str | None = None  # scripted policies only
    params: dict = field(default_factory=dict)
    schema: str = field(default_factory=feature_schema_hash)

    def q_row(self, key: tuple) -> list[float]:
        row = self.params.get(key)
        if row is None:
            row = default_row(self.seed, key)
        return row

    def params_hash(self) -> str:
        h = hashlib.sha256()
        for key in sorted(self.params, key=repr):
            h.update(repr(key).encode())
            h.update(struct.pack("<5d", *self.params[key]))
        h.update(
            f"{self.role.value}|{self.level}|{self.kind}|{self.seed}|{self.fixed_action}".encode()
        )
        return h.hexdigest()[:16]

    def identity(self) -> str:
        return f"{self.role.value}-level{self.level}-{self.kind}-{self.params_hash()}"


def default_row(seed: int, key: tuple) -> list[float]:
    """Uniform values in [0, 0.01) derived from (seed, key); order-free."""
    digest = hashlib.sha256(f"{seed}|{key!r}".encode()).digest()
    return [v / 2**32 * 0.01 for v in struct.unpack("<5I", digest[:20])]


def make_heuristic_evader(epsilon0: float = 0.1) -> Policy:
    return Policy(role=Role.EVADER, level=0, kind=HEURISTIC, epsilon0=epsilon0)


def make_trained(role: Role, level: int, seed: int) -> Policy:
    return Policy(role=role, level=level, kind=TRAINED, seed=seed)


def make_scripted(role: Role, action: Action, level: int = 0) -> Policy:
    return Policy(role=role, level=level, kind=SCRIPTED, fixed_action=action.value)


AVOID_STALENESS = 2
AVOID_DISTANCE = 3
AVOID_SURCHARGE = 10.0


def evader_level0_act(f: BeliefFeatures, grid: GridMap, rng, epsilon0: float = 0.1) -> Action:
    """Scripted evader: shortest path to goal, noisy, pursuer-averse.

    With probability ``epsilon0`` take a uniformly random valid action.
    Otherwise follow a shortest path; if a pursuer was seen within the last
    two steps and its last position is within Chebyshev distance 3, replan
    with the cells adjacent to that position surcharged and take the first
    step of the detour.
    """
    pos = f.self_pos
    if epsilon0 > 0 and rng.random() < epsilon0:
        moves = _ordered_ground_moves(grid, pos)
        return moves[int(rng.integers(len(moves)))]
    threat = f.last_known_pursuer_cell
    if (
        threat is not None
        and f.staleness <= AVOID_STALENESS
        and chebyshev(pos, threat) <= AVOID_DISTANCE
    ):
        surcharge = {}
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                surcharge[(threat[0] + dx, threat[1] + dy)] = AVOID_SURCHARGE
        path = astar(grid, pos, f.evader_goal, surcharge)
        if len(path) > 1:
            return _action_between(pos, path[1])
        return Action.STAY
    step = next_step_to_goal(grid, pos, f.evader_goal)
    return step if step is not None else Action.STAY


def _ordered_ground_moves(grid: GridMap, pos: Cell) -> list[Action]:
    moves = [
        a
        for a in ACTIONS[:4]
        if (pos[0] + DELTAS[a][0], pos[1] + DELTAS[a][1]) in grid.accessible
    ]
    moves.append(Action.STAY)
    return moves


def _action_between(a: Cell, b: Cell) -> Action:
    delta = (b[0] - a[0], b[1] - a[1])
    for action, d in DELTAS.items():
        if d == delta:
            return action
    raise ValueError(f"cells {a} and {b} not adjacent")


def policy_act(
    policy: Policy,
    f: BeliefFeatures,
    valid: set[Action],
    rng,
    grid: GridMap = None,
    epsilon: float = 0.0,
) -> Action:
    """Select one action. Greedy by default; ``epsilon`` enables training
    exploration. Returned action is always a member of ``valid``; ties go
    to the earlier action in fixed order. Never mutates the policy.
    """
    if grid is None:
        raise ValueError("policy_act needs the grid for feature discretization")
    if policy.kind == HEURISTIC:
        return evader_level0_act(f, grid, rng, policy.epsilon0)
    if policy.kind == SCRIPTED:
        action = Action(policy.fixed_action)
        return action if action in valid else Action.STAY
    if epsilon > 0 and rng.random() < epsilon:
        ordered = sorted(valid, key=lambda a: ACTION_INDEX[a])
        return ordered[int(rng.integers(len(ordered)))]
    row = policy.q_row(state_key(policy.role, f, grid))
    best = None
    best_v = None
    for i, action in enumerate(ACTIONS):
        if action not in valid:
            continue
        if best_v is None or row[i] > best_v:
            best, best_v = action, row[i]
    return best
