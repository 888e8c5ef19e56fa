"""Replay rendering: one frame per logged timestep, as text or PNG.

Frames show the map glyphs with the pursuer team's current view marked,
the evader goal, and the three agents. The team view is recomputed from
the logged agent states and checked against each record's visible-cell
digests, so a log replayed against the wrong map or radii fails loudly.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

from .errors import HashMismatchError
from .logio import EpisodeLog, digest_cells, map_hash
from .visibility import ground_fov, hlp_fov
from .world import CellKind, GridMap, KIND_GLYPHS

_AGENT_GLYPHS = (("hlp", "H"), ("llp", "L"), ("evader", "E"))

_COLORS = {
    "open": (235, 235, 235),
    "building": (70, 70, 70),
    "foliage": (110, 170, 90),
    "fov": (185, 210, 240),
    "fov_foliage": (140, 190, 150),
    "goal": (240, 200, 60),
    "H": (50, 90, 220),
    "L": (200, 40, 40),
    "E": (240, 130, 30),
}


def _team_view(grid: GridMap, rec, scenario: dict):
    hlp_pos = tuple(rec.agents["hlp"][0])
    llp_pos, llp_heading = tuple(rec.agents["llp"][0]), rec.agents["llp"][1]
    view_h = hlp_fov(grid, hlp_pos, scenario["hlp_radius"])
    if hlp_pos not in view_h:
        view_h = view_h | {hlp_pos}
    view_l = ground_fov(grid, llp_pos, llp_heading, scenario["ground_radius"])
    for observer, view in (("hlp", view_h), ("llp", view_l)):
        if digest_cells(view) != rec.obs[observer]["visible"]:
            raise HashMismatchError(
                f"t={rec.t}: recomputed {observer} view does not match log digest"
            )
    return view_h | view_l


def render_frames(log: EpisodeLog, grid: GridMap) -> list[str]:
    """Text frames; raises :class:`HashMismatchError` on a wrong map."""
    if map_hash(grid) != log.header["map_hash"]:
        raise HashMismatchError("map file does not match the log's map hash")
    scenario = log.header["scenario"]
    goal = tuple(scenario["evader_goal"])
    frames = []
    for rec in log.steps:
        view = _team_view(grid, rec, scenario)
        rows = []
        for y in range(grid.height):
            row = []
            for x in range(grid.width):
                glyph = KIND_GLYPHS[grid.kind_at((x, y))]
                if (x, y) in view:
                    glyph = ":"
                row.append(glyph)
            rows.append(row)
        gx, gy = goal
        rows[gy][gx] = "G"
        for key, glyph in _AGENT_GLYPHS:
            x, y = rec.agents[key][0]
            rows[y][x] = glyph
        status = log.status.value if rec.t == log.final_t else "Running"
        body = "\n".join("".join(r) for r in rows)
        frames.append(f"t={rec.t} status={status}\n{body}\n")
    return frames


def _png_bytes(width: int, height: int, rgb_rows: list[bytes]) -> bytes:
    """Minimal RGB8 PNG encoder (stdlib only, deterministic bytes)."""

    def chunk(tag: bytes, data: bytes) -> bytes:
        return (
            struct.pack(">I", len(data))
            + tag
            + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF)
        )

    raw = b"".join(b"\x00" + row for row in rgb_rows)
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (
        b"\x89PNG\r\n\x1a\n"
        + chunk(b"IHDR", ihdr)
        + chunk(b"IDAT", zlib.compress(raw, 9))
        + chunk(b"IEND", b"")
    )


def render_png_frames(log: EpisodeLog, grid: GridMap, scale: int = 12) -> list[bytes]:
    """PNG frames with the same content as the text frames."""
    if map_hash(grid) != log.header["map_hash"]:
        raise HashMismatchError("map file does not match the log's map hash")
    scenario = log.header["scenario"]
    goal = tuple(scenario["evader_goal"])
    kind_color = {
        CellKind.OPEN: _COLORS["open"],
        CellKind.BUILDING: _COLORS["building"],
        CellKind.FOLIAGE: _COLORS["foliage"],
    }
    frames = []
    for rec in log.steps:
        view = _team_view(grid, rec, scenario)
        colors = []
        for y in range(grid.height):
            row = []
            for x in range(grid.width):
                kind = grid.kind_at((x, y))
                color = kind_color[kind]
                if (x, y) in view and kind != CellKind.BUILDING:
                    color = _COLORS["fov_foliage"] if kind == CellKind.FOLIAGE else _COLORS["fov"]
                row.append(color)
            colors.append(row)
        colors[goal[1]][goal[0]] = _COLORS["goal"]
        for key, glyph in _AGENT_GLYPHS:
            x, y = rec.agents[key][0]
            colors[y][x] = _COLORS[glyph]
        rgb_rows = []
        for row in colors:
            line = b"".join(bytes(c) * scale for c in row)
            rgb_rows.extend([line] * scale)
        frames.append(_png_bytes(grid.width * scale, grid.height * scale, rgb_rows))
    return frames


def write_frames(log: EpisodeLog, grid: GridMap, out_dir, fmt: str = "text") -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    if fmt == "text":
        for i, frame in enumerate(render_frames(log, grid)):
            path = out_dir / f"frame_{i:04d}.txt"
            path.write_text(frame)
            paths.append(path)
    elif fmt == "png":
        for i, frame in enumerate(render_png_frames(log, grid)):
            path = out_dir / f"frame_{i:04d}.png"
            path.write_bytes(frame)
            paths.append(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return paths
