"""Episode metrics and the cross-play evaluation matrix.

Four metrics per batch of episodes: pursuer win rate (timeout counts as an
evader success), fraction of episodes with at least one team sighting of
the evader, mean timestep of the first sighting, and mean fraction of the
episode the evader spent inside the team's view. Sightings are counted on
records before the final state and normalized by episode length, so the
FOV fraction stays within [0, 1] and is zero exactly when nothing was ever
seen.

The cross-play matrix plays every pursuer level against every evader
level; when a controller config and classifier model are supplied each
cell is also run in the adaptive online mode (initial level = the cell's
pursuer level) over the same scenarios and seeds, making offline/online
columns directly comparable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import EmptyLogSetError
from .logio import EpisodeLog
from .world import Role, Status


@dataclass(frozen=True)
class MetricsReport:
    pursuer_win_rate: float
    evader_seen_rate: float
    first_seen_mean: float | None  # absent when nothing was ever seen
    time_in_fov: float
    n_episodes: int
    win_rate_ci: float  # 95% normal-approximation half-widths
    seen_rate_ci: float

    def to_dict(self) -> dict:
        return {
            "pursuer_win_rate": self.pursuer_win_rate,
            "evader_seen_rate": self.evader_seen_rate,
            "first_seen_mean": self.first_seen_mean,
            "time_in_fov": self.time_in_fov,
            "n_episodes": self.n_episodes,
            "win_rate_ci": self.win_rate_ci,
            "seen_rate_ci": self.seen_rate_ci,
        }


def _ci_halfwidth(p: float, n: int) -> float:
    return 1.96 * math.sqrt(p * (1.0 - p) / n)


def _step_detected(rec) -> bool:
    for observer in ("hlp", "llp"):
        for role, _cell in rec.obs[observer]["detections"]:
            if role == Role.EVADER.value:
                return True
    return False


def compute_metrics(logs: list[EpisodeLog]) -> MetricsReport:
    """Aggregate a nonempty batch of terminal episode logs.

    Detection is team-level: the evader inside either pursuer's view.
    Records are scanned at t in [0, final_t); a zero-length episode
    contributes no sightings and a zero FOV fraction.
    """
    if not logs:
        raise EmptyLogSetError("no logs to aggregate")
    wins = 0
    seen_episodes = 0
    first_seen = []
    fov_fractions = []
    for log in logs:
        if log.status == Status.RUNNING:
            raise ValueError("log is not terminal")
        wins += log.status == Status.PURSUER_WIN
        length = log.final_t
        detected_ts = [
            rec.t for rec in log.steps if rec.t < length and _step_detected(rec)
        ]
        if detected_ts:
            seen_episodes += 1
            first_seen.append(detected_ts[0])
        fov_fractions.append(len(detected_ts) / max(length, 1))
    n = len(logs)
    win_rate = wins / n
    seen_rate = seen_episodes / n
    return MetricsReport(
        pursuer_win_rate=win_rate,
        evader_seen_rate=seen_rate,
        first_seen_mean=(sum(first_seen) / len(first_seen)) if first_seen else None,
        time_in_fov=sum(fov_fractions) / n,
        n_episodes=n,
        win_rate_ci=_ci_halfwidth(win_rate, n),
        seen_rate_ci=_ci_halfwidth(seen_rate, n),
    )


@dataclass
class CrossPlayMatrix:
    """Metrics per (pursuer level, evader level), offline and optionally online."""

    K: int
    n_per_cell: int
    seed: int
    offline: dict = field(default_factory=dict)  # (i, j) -> MetricsReport
    online: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        def cells(d):
            return [
                {"pursuer_level": i, "evader_level": j, "metrics": m.to_dict()}
                for (i, j), m in sorted(d.items())
            ]

        out = {
            "K": self.K,
            "n_per_cell": self.n_per_cell,
            "seed": self.seed,
            "offline": cells(self.offline),
        }
        if self.online:
            out["online"] = cells(self.online)
        return out

    def text_table(self) -> str:
        """Aligned plain-text table, one row per scenario and phase."""
        header = f"{'scenario':<16} {'phase':<8} {'win':>6} {'seen':>6} {'first':>7} {'fov':>6}"
        lines = [header, "-" * len(header)]
        for (i, j), report in sorted(self.offline.items()):
            rows = [("offline", report)]
            if (i, j) in self.online:
                rows.append(("online", self.online[(i, j)]))
            for phase, m in rows:
                first = f"{m.first_seen_mean:.2f}" if m.first_seen_mean is not None else "-"
                lines.append(
                    f"P{i} vs E{j}{'':<8} {phase:<8} {m.pursuer_win_rate:>6.2f} "
                    f"{m.evader_seen_rate:>6.2f} {first:>7} {m.time_in_fov:>6.2f}"
                )
        return "\n".join(lines) + "\n"


def cross_play(
    grid,
    library,
    n_per_cell: int,
    seed: int,
    controller_config=None,
    model=None,
    keep_logs: bool = False,
):
    """Evaluate every pursuer level against every evader level.

    Scenario and episode seeds are split per cell and episode from the
    master seed, and the online pass (when a controller config and model
    are given) reuses the offline cell's seeds so the two phases differ
    only in switching behavior. Returns the matrix, plus the raw logs as
    ``matrix.logs`` when ``keep_logs`` is set.
    """
    from .controller import run_online_episode
    from .scenario import sample_scenario
    from .training import _sub_rng, _sub_seed, rollout

    matrix = CrossPlayMatrix(K=library.K, n_per_cell=n_per_cell, seed=seed)
    logs: dict = {"offline": {}, "online": {}}
    for i in range(library.K + 1):
        pair = library.pair(i)
        for j in range(library.K + 1):
            evader = library.evader(j)
            cell_logs = []
            scenarios = []
            ep_seeds = []
            for e in range(n_per_cell):
                scenario = sample_scenario(
                    grid, _sub_rng(seed, i, j, e, 0), library.config.sampler
                )
                ep_seed = _sub_seed(seed, i, j, e, 1)
                scenarios.append(scenario)
                ep_seeds.append(ep_seed)
                cell_logs.append(rollout(grid, pair, evader, scenario, ep_seed, library.reward))
            matrix.offline[(i, j)] = compute_metrics(cell_logs)
            if keep_logs:
                logs["offline"][(i, j)] = cell_logs
            if controller_config is not None and model is not None:
                from dataclasses import replace as dc_replace

                cfg = dc_replace(controller_config, initial_level=i)
                online_logs = [
                    run_online_episode(
                        grid, library, model, evader, scenario, ep_seed, cfg, library.reward
                    )
                    for scenario, ep_seed in zip(scenarios, ep_seeds)
                ]
                matrix.online[(i, j)] = compute_metrics(online_logs)
                if keep_logs:
                    logs["online"][(i, j)] = online_logs
    if keep_logs:
        matrix.logs = logs
    return matrix
