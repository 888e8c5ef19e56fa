"""Fields of view and observations against independent geometric oracles."""

from fractions import Fraction

import pytest

from pegrid.errors import NonContiguousTimestepError
from pegrid.visibility import (
    TeamHistory,
    fuse_team_observations,
    ground_fov,
    hlp_fov,
    line_of_sight,
    make_observation,
)
from pegrid.world import CellKind, Role, chebyshev, initial_state, load_map

from conftest import random_connected_map


# --- oracles ---------------------------------------------------------------

def hlp_fov_oracle(grid, pos, radius):
    return frozenset(
        (x, y)
        for x in range(grid.width)
        for y in range(grid.height)
        if chebyshev((x, y), pos) <= radius and grid.kind_at((x, y)) != CellKind.FOLIAGE
    )


def in_sector(heading, dx, dy):
    return {
        "E": dx >= abs(dy),
        "W": -dx >= abs(dy),
        "N": -dy >= abs(dx),
        "S": dy >= abs(dx),
    }[heading]


def segment_blocked_oracle(grid, frm, to):
    """Exact rational test: does the open center-to-center segment cross the
    interior of any building cell strictly between the endpoints?"""
    p0 = (Fraction(2 * frm[0] + 1), Fraction(2 * frm[1] + 1))
    p1 = (Fraction(2 * to[0] + 1), Fraction(2 * to[1] + 1))
    d = (p1[0] - p0[0], p1[1] - p0[1])
    lo_x, hi_x = sorted((frm[0], to[0]))
    lo_y, hi_y = sorted((frm[1], to[1]))
    for cx in range(lo_x, hi_x + 1):
        for cy in range(lo_y, hi_y + 1):
            if (cx, cy) in (frm, to):
                continue
            if grid.kind_at((cx, cy)) != CellKind.BUILDING:
                continue
            # slab clip of the segment against the cell's closed square
            t_enter, t_exit = Fraction(0), Fraction(1)
            ok = True
            for axis, (lo, hi) in enumerate((( 2 * cx, 2 * cx + 2), (2 * cy, 2 * cy + 2))):
                if d[axis] == 0:
                    if not (lo <= p0[axis] <= hi):
                        ok = False
                        break
                    continue
                t0 = (Fraction(lo) - p0[axis]) / d[axis]
                t1 = (Fraction(hi) - p0[axis]) / d[axis]
                if t0 > t1:
                    t0, t1 = t1, t0
                t_enter = max(t_enter, t0)
                t_exit = min(t_exit, t1)
            # positive-length overlap means the interior is crossed; a
            # single-point touch (corner) does not block
            if ok and t_enter < t_exit:
                return True
    return False


def ground_fov_oracle(grid, pos, heading, radius):
    out = {pos}
    for x in range(grid.width):
        for y in range(grid.height):
            if (x, y) == pos or chebyshev((x, y), pos) > radius:
                continue
            if not in_sector(heading, x - pos[0], y - pos[1]):
                continue
            if not segment_blocked_oracle(grid, pos, (x, y)):
                out.add((x, y))
    return frozenset(out)


# --- hlp_fov ---------------------------------------------------------------

class TestHlpFov:
    def test_full_coverage_open_map(self, open9):
        assert len(hlp_fov(open9, (4, 4), 4)) == 81

    def test_foliage_excluded(self):
        rows = ["." * 9 for _ in range(9)]
        rows[3] = "...~....."
        grid = load_map("\n".join(rows))
        view = hlp_fov(grid, (4, 4), 4)
        assert (3, 3) not in view
        assert len(view) == 80

    def test_buildings_included(self):
        rows = ["." * 9 for _ in range(9)]
        rows[4] = "....#...."
        grid = load_map("\n".join(rows))
        assert (4, 4) in hlp_fov(grid, (3, 4), 4)

    def test_matches_bruteforce_on_random_maps(self, rng):
        for _ in range(40):
            grid = random_connected_map(rng, 12, 12)
            pos = (int(rng.integers(12)), int(rng.integers(12)))
            assert hlp_fov(grid, pos, 4) == hlp_fov_oracle(grid, pos, 4)


# --- line_of_sight ----------------------------------------------------------

class TestLineOfSight:
    def test_self_visible(self, open9):
        assert line_of_sight(open9, (3, 3), (3, 3))

    def test_direct_blocker(self):
        grid = load_map("....\n.##.\n....\n....")
        assert line_of_sight(grid, (0, 0), (3, 0))  # same row, no blocker
        grid2 = load_map(".#..\n....\n....\n....")
        assert not line_of_sight(grid2, (0, 0), (3, 0))

    def test_building_facade_visible_but_not_behind(self):
        grid = load_map(".#..\n....\n....\n....")
        assert line_of_sight(grid, (0, 0), (1, 0))  # the blocker itself
        assert not line_of_sight(grid, (0, 0), (2, 0))

    def test_corner_touch_does_not_block(self):
        grid = load_map("..#\n.#.\n...")
        # the diagonal actually crosses the building cell (1,1)
        assert line_of_sight(grid, (0, 2), (2, 0)) is False
        # (2,1) and (1,2) touch the (0,0)->(3,3) diagonal only at the lattice
        # corner (2,2); corner contact must not occlude
        grid2 = load_map("....\n..#.\n.#..\n....")
        assert line_of_sight(grid2, (0, 0), (3, 3))
        grid3 = load_map("....\n.#..\n....\n....")
        assert not line_of_sight(grid3, (0, 0), (3, 3))

    def test_symmetry(self, rng):
        for _ in range(200):
            grid = random_connected_map(rng, 10, 10)
            a = (int(rng.integers(10)), int(rng.integers(10)))
            b = (int(rng.integers(10)), int(rng.integers(10)))
            assert line_of_sight(grid, a, b) == line_of_sight(grid, b, a)

    def test_matches_rational_oracle(self, rng):
        checked = 0
        while checked < 300:
            grid = random_connected_map(rng, 10, 10)
            a = (int(rng.integers(10)), int(rng.integers(10)))
            b = (int(rng.integers(10)), int(rng.integers(10)))
            expected = not segment_blocked_oracle(grid, a, b)
            assert line_of_sight(grid, a, b) == expected
            checked += 1


# --- ground_fov -------------------------------------------------------------

class TestGroundFov:
    def test_open_map_east_sector(self, open9):
        view = ground_fov(open9, (4, 4), "E", 2)
        expected = {(4, 4)} | {
            (4 + dx, 4 + dy) for dx in (1, 2) for dy in range(-dx, dx + 1) if abs(dy) <= dx
        }
        expected = {c for c in expected if chebyshev(c, (4, 4)) <= 2}
        assert view == frozenset(expected)
        assert len(view) == 9

    def test_building_shadow(self):
        rows = ["." * 9 for _ in range(9)]
        rows[4] = "....#...."
        grid = load_map("\n".join(rows))
        view = ground_fov(grid, (3, 4), "E", 4)
        assert (4, 4) in view  # facade
        assert all((x, 4) not in view for x in (5, 6, 7))  # shadow behind

    def test_foliage_does_not_block_ground_sight(self):
        rows = ["." * 9 for _ in range(9)]
        rows[4] = "....~~..."
        grid = load_map("\n".join(rows))
        view = ground_fov(grid, (3, 4), "E", 3)
        assert (4, 4) in view and (5, 4) in view and (6, 4) in view

    def test_own_cell_always_included(self, rng):
        for _ in range(50):
            grid = random_connected_map(rng, 8, 8)
            cells = sorted(grid.accessible)
            pos = cells[int(rng.integers(len(cells)))]
            heading = "NSEW"[int(rng.integers(4))]
            assert pos in ground_fov(grid, pos, heading, 2)

    def test_matches_bruteforce_oracle(self, rng):
        for _ in range(25):
            grid = random_connected_map(rng, 10, 10)
            cells = sorted(grid.accessible)
            pos = cells[int(rng.integers(len(cells)))]
            heading = "NSEW"[int(rng.integers(4))]
            assert ground_fov(grid, pos, heading, 2) == ground_fov_oracle(grid, pos, heading, 2)

    def test_radius_bound(self, rng):
        for _ in range(20):
            grid = random_connected_map(rng, 10, 10)
            cells = sorted(grid.accessible)
            pos = cells[int(rng.integers(len(cells)))]
            for cell in ground_fov(grid, pos, "N", 2):
                assert chebyshev(cell, pos) <= 2

    def test_monotone_occlusion(self, rng):
        # adding a building never enlarges a ground view
        for _ in range(20):
            grid = random_connected_map(rng, 8, 8, p_building=0.05)
            cells = sorted(grid.accessible)
            pos = cells[int(rng.integers(len(cells)))]
            others = [c for c in cells if c != pos]
            extra = others[int(rng.integers(len(others)))]
            rows = [list(row) for row in grid.text.strip("\n").split("\n")]
            rows[extra[1]][extra[0]] = "#"
            try:
                denser = load_map("\n".join("".join(r) for r in rows))
            except Exception:
                continue
            before = ground_fov(grid, pos, "E", 3)
            after = ground_fov(denser, pos, "E", 3)
            assert after <= before


# --- observations and fusion -------------------------------------------------

def place(grid, hlp, llp, evader, goal=(0, 1)):
    return initial_state(grid, hlp, llp, evader, goal, horizon=100)


class TestMakeObservation:
    def test_evader_outside_fov_not_detected(self, open9):
        state = place(open9, hlp=(0, 0), llp=(0, 8), evader=(8, 8), goal=(0, 1))
        obs = make_observation(open9, state, Role.HLP)
        assert obs.detected_cell(Role.EVADER) is None

    def test_hlp_detects_on_open_cell(self, open9):
        state = place(open9, hlp=(4, 4), llp=(0, 8), evader=(6, 5), goal=(0, 1))
        obs = make_observation(open9, state, Role.HLP)
        assert obs.detected_cell(Role.EVADER) == (6, 5)

    def test_hlp_blind_to_foliage_evader(self):
        rows = ["." * 9 for _ in range(9)]
        rows[4] = "....~...."
        grid = load_map("\n".join(rows))
        state = place(grid, hlp=(4, 4), llp=(0, 8), evader=(4, 4), goal=(0, 1))
        # HLP hovers right above the foliage cell the evader hides in
        obs = make_observation(grid, state, Role.HLP)
        assert obs.detected_cell(Role.EVADER) is None
        assert obs.detected_cell(Role.HLP) == (4, 4)  # still sees itself

    def test_llp_sees_evader_under_foliage(self):
        rows = ["." * 9 for _ in range(9)]
        rows[4] = "....~...."
        grid = load_map("\n".join(rows))
        state = place(grid, hlp=(0, 0), llp=(3, 4), evader=(4, 4), goal=(0, 1))
        obs = make_observation(grid, state, Role.LLP)  # facing E by default
        assert obs.detected_cell(Role.EVADER) == (4, 4)

    def test_evader_never_sees_hlp(self, open9):
        state = place(open9, hlp=(5, 4), llp=(0, 8), evader=(4, 4), goal=(0, 1))
        obs = make_observation(open9, state, Role.EVADER)
        assert obs.detected_cell(Role.HLP) is None
        assert (5, 4) in obs.visible_cells  # the cell itself is visible

    def test_detections_match_membership_oracle(self, rng):
        for _ in range(40):
            grid = random_connected_map(rng, 10, 10)
            cells = sorted(grid.accessible)
            pick = lambda: cells[int(rng.integers(len(cells)))]
            evader = pick()
            goal = next(c for c in cells if c != evader)
            state = place(grid, (int(rng.integers(10)), int(rng.integers(10))), pick(), evader, goal)
            for role in Role:
                obs = make_observation(grid, state, role)
                for other in Role:
                    cell = state.agent(other).position
                    detected = obs.detected_cell(other) is not None
                    if other == role:
                        assert detected
                    elif role == Role.EVADER and other == Role.HLP:
                        assert not detected
                    elif role == Role.HLP:
                        expected = cell in obs.visible_cells and grid.kind_at(cell) != CellKind.FOLIAGE
                        assert detected == expected
                    else:
                        assert detected == (cell in obs.visible_cells)
                for _r, cell in obs.detections:
                    assert cell in obs.visible_cells

    def test_observer_detects_itself(self, rng):
        grid = random_connected_map(rng, 8, 8)
        cells = sorted(grid.accessible)
        state = place(grid, (7, 7), cells[0], cells[1], cells[2])
        for role in Role:
            obs = make_observation(grid, state, role)
            assert obs.detected_cell(role) == state.agent(role).position


class TestFusion:
    def test_base_case_and_append(self, open9):
        state = place(open9, (0, 0), (0, 8), (8, 8), (0, 1))
        h = make_observation(open9, state, Role.HLP)
        l = make_observation(open9, state, Role.LLP)
        hist = fuse_team_observations(TeamHistory(), h, l)
        assert len(hist) == 1
        assert hist.entries[0].hlp is h and hist.entries[0].llp is l

    def test_non_contiguous_rejected(self, open9):
        state = place(open9, (0, 0), (0, 8), (8, 8), (0, 1))
        h = make_observation(open9, state, Role.HLP)
        l = make_observation(open9, state, Role.LLP)
        hist = fuse_team_observations(TeamHistory(), h, l)
        with pytest.raises(NonContiguousTimestepError):
            fuse_team_observations(hist, h, l)  # t=0 again, expected t=1

    def test_llp_only_detection_reaches_team(self):
        rows = ["." * 9 for _ in range(9)]
        rows[4] = "....~...."
        grid = load_map("\n".join(rows))
        state = place(grid, hlp=(0, 0), llp=(3, 4), evader=(4, 4), goal=(0, 1))
        h = make_observation(grid, state, Role.HLP)
        l = make_observation(grid, state, Role.LLP)
        hist = fuse_team_observations(TeamHistory(), h, l)
        assert h.detected_cell(Role.EVADER) is None
        assert hist.entries[0].evader_cell() == (4, 4)


class TestMoreOcclusionProperties:
    def test_adding_foliage_never_enlarges_overhead_view(self, rng):
        from pegrid.world import CellKind

        for _ in range(20):
            grid = random_connected_map(rng, 8, 8, p_building=0.05, p_foliage=0.05)
            cells = sorted(grid.accessible)
            pos = (int(rng.integers(8)), int(rng.integers(8)))
            open_cells = [c for c in cells if grid.kind_at(c) == CellKind.OPEN]
            if not open_cells:
                continue
            extra = open_cells[int(rng.integers(len(open_cells)))]
            rows = [list(row) for row in grid.text.strip("\n").split("\n")]
            rows[extra[1]][extra[0]] = "~"
            try:
                denser = load_map("\n".join("".join(r) for r in rows))
            except Exception:
                continue
            assert hlp_fov(denser, pos, 4) <= hlp_fov(grid, pos, 4)

    def test_overhead_view_within_radius(self, rng):
        for _ in range(20):
            grid = random_connected_map(rng, 10, 10)
            pos = (int(rng.integers(10)), int(rng.integers(10)))
            for cell in hlp_fov(grid, pos, 4):
                assert chebyshev(cell, pos) <= 4
