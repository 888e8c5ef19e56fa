"""Opponent-level classification from pursuer-team observation histories.

The team's fused history is reduced, at each timestep, to a fixed vector of
detection statistics (rates, sighted-movement speed, staleness, foliage
fraction, proximity) and fed to a regularized multinomial logistic
regression trained by full-batch gradient descent. Sentinel value -1 plus
a never-seen indicator covers timesteps before the first sighting, so the
model always emits a distribution over evader levels.

Feature extraction has exactly one implementation (:class:`ObservationTrack`)
shared by live histories and persisted logs, so train-time and replay-time
vectors cannot diverge.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateDatasetError, EmptyLogSetError, SchemaMismatchError
from .logio import EpisodeLog
from .visibility import TeamHistory, TeamRecord
from .world import Cell, CellKind, GridMap, Role, chebyshev

WINDOW = 8

FEATURE_NAMES = (
    "detect_rate_window",
    "speed_mean_window",
    "speed_var_window",
    "staleness_now",
    "staleness_mean_window",
    "never_seen",
    "foliage_detect_fraction",
    "pursuer_distance_mean_window",
    "pursuer_distance_min_window",
    "time_fraction",
    "detect_rate_total",
)

CLASSIFIER_SCHEMA = f"clf-v1:window{WINDOW}:" + ",".join(FEATURE_NAMES)


def classifier_schema_hash() -> str:
    return hashlib.sha256(CLASSIFIER_SCHEMA.encode()).hexdigest()[:16]


class ObservationTrack:
    """Incremental per-episode feature state for the classifier.

    Feed it one fused team step at a time (live records or log rows) and
    read the current feature vector with :meth:`features`.
    """

    __slots__ = (
        "grid", "horizon", "rows", "t", "detect_total", "foliage_total",
        "last_seen_t", "last_seen_cell",
    )

    def __init__(self, grid: GridMap, horizon: int):
        self.grid = grid
        self.horizon = horizon
        self.rows = []  # (t, cell|None, staleness, min_pursuer_dist|None)
        self.t = -1
        self.detect_total = 0
        self.foliage_total = 0
        self.last_seen_t = -1
        self.last_seen_cell: Cell | None = None

    def consume_record(self, record: TeamRecord) -> None:
        cell = record.evader_cell()
        self.add_row(
            record.t, cell, record.hlp.self_state.position, record.llp.self_state.position
        )

    def add_row(self, t: int, evader_cell: Cell | None, hlp_pos: Cell, llp_pos: Cell) -> None:
        self.t = t
        dist = None
        if evader_cell is not None:
            self.detect_total += 1
            if self.grid.kind_at(evader_cell) == CellKind.FOLIAGE:
                self.foliage_total += 1
            self.last_seen_t = t
            self.last_seen_cell = evader_cell
            dist = min(chebyshev(evader_cell, hlp_pos), chebyshev(evader_cell, llp_pos))
        staleness = t - self.last_seen_t if self.last_seen_t >= 0 else self.horizon + 1
        self.rows.append((t, evader_cell, min(staleness, self.horizon + 1), dist))
        if len(self.rows) > WINDOW:
            del self.rows[0]

    def features(self) -> np.ndarray:
        rows = self.rows
        n = len(rows)
        h = self.horizon
        detected = [r for r in rows if r[1] is not None]
        # per-step sighted speed between consecutive sightings in the window
        speeds = []
        for a, b in zip(detected, detected[1:]):
            gap = b[0] - a[0]
            if gap > 0:
                speeds.append(chebyshev(b[1], a[1]) / gap)
        if speeds:
            speed_mean = float(np.mean(speeds))
            speed_var = float(np.var(speeds))
        else:
            speed_mean = speed_var = -1.0
        never = self.last_seen_t < 0
        stale_now = (self.t - self.last_seen_t) if not never else h + 1
        dists = [r[3] for r in detected]
        return np.array(
            [
                len(detected) / n,
                speed_mean,
                speed_var,
                min(stale_now, h + 1) / h,
                float(np.mean([r[2] for r in rows])) / h,
                1.0 if never else 0.0,
                (self.foliage_total / self.detect_total) if self.detect_total else -1.0,
                float(np.mean(dists)) if dists else -1.0,
                float(min(dists)) if dists else -1.0,
                self.t / h,
                self.detect_total / (self.t + 1),
            ]
        )


def features_at(grid: GridMap, history: TeamHistory, t: int, horizon: int) -> np.ndarray:
    """Feature vector from a history prefix; reads entries up to t only."""
    if t > history.last_t():
        raise ValueError(f"t={t} beyond history end {history.last_t()}")
    track = ObservationTrack(grid, horizon)
    for record in history.entries[: t + 1]:
        track.consume_record(record)
    return track.features()


def _log_track_rows(log: EpisodeLog):
    """(t, evader_cell|None, hlp_pos, llp_pos) rows from a persisted log."""
    for rec in log.steps:
        cell = None
        for observer in ("hlp", "llp"):
            for role, c in rec.obs[observer]["detections"]:
                if role == Role.EVADER.value:
                    cell = tuple(c)
                    break
            if cell is not None:
                break
        yield rec.t, cell, tuple(rec.agents["hlp"][0]), tuple(rec.agents["llp"][0])


@dataclass
class LabeledDataset:
    """Classifier examples with an episode-level train/held-out split.

    ``episode_labels`` has one entry per episode rolled (including episodes
    too short to contribute examples), so label balance is auditable.
    """

    X: np.ndarray
    y: np.ndarray
    episode_ids: np.ndarray
    ts: np.ndarray
    final_mask: np.ndarray
    train_mask: np.ndarray
    episode_labels: np.ndarray
    horizon: int
    seed: int = 0
    schema: str = field(default_factory=classifier_schema_hash)

    def dataset_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.X.tobytes())
        h.update(self.y.tobytes())
        h.update(self.train_mask.tobytes())
        return h.hexdigest()[:16]

    def class_counts(self) -> dict:
        values, counts = np.unique(self.y, return_counts=True)
        return {int(v): int(c) for v, c in zip(values, counts)}


def generate_dataset(
    grid: GridMap, library, episodes_per_pair: int, seed: int
) -> LabeledDataset:
    """Roll fixed pursuer/evader level pairings and label each timestep.

    Every (pursuer level, evader level) combination contributes the same
    number of episodes, labeled by the evader level. Examples are the
    feature vectors at every t >= 1; the 80/20 train/held-out split is by
    episode, never by timestep.
    """
    from .scenario import sample_scenario
    from .training import _sub_rng, _sub_seed, run_episode

    levels = range(library.K + 1)
    X, y, eps_ids, ts, finals = [], [], [], [], []
    episode_labels = []
    episode_id = 0
    for j in levels:  # pursuer level
        pair = library.pair(j)
        for i in levels:  # evader level == label
            evader = library.evader(i)
            for e in range(episodes_per_pair):
                scenario = sample_scenario(
                    grid, _sub_rng(seed, j, i, e, 0), library.config.sampler
                )
                result = run_episode(
                    grid, scenario, pair[0], pair[1], evader,
                    _sub_seed(seed, j, i, e, 1), library.reward, record=True,
                )
                track = ObservationTrack(grid, scenario.horizon)
                final_t = result.final_t
                for t, cell, hlp_pos, llp_pos in _log_track_rows(result.log):
                    track.add_row(t, cell, hlp_pos, llp_pos)
                    if t >= 1:
                        X.append(track.features())
                        y.append(i)
                        eps_ids.append(episode_id)
                        ts.append(t)
                        finals.append(t == final_t)
                episode_labels.append(i)
                episode_id += 1
    X = np.array(X)
    y = np.array(y, dtype=np.int64)
    eps_ids = np.array(eps_ids, dtype=np.int64)
    ts = np.array(ts, dtype=np.int64)
    finals = np.array(finals, dtype=bool)

    order = _sub_rng(seed, 999).permutation(episode_id)
    n_train = int(round(0.8 * episode_id))
    train_episode_ids = set(order[:n_train].tolist())
    train_mask = np.array([e in train_episode_ids for e in eps_ids], dtype=bool)
    return LabeledDataset(
        X=X, y=y, episode_ids=eps_ids, ts=ts, final_mask=finals,
        train_mask=train_mask, episode_labels=np.array(episode_labels, dtype=np.int64),
        horizon=library.config.sampler.horizon, seed=seed,
    )


@dataclass
class ClassifierModel:
    """Multinomial logistic regression over track features.

    ``weights`` has one row per class over the standardized features plus
    a bias column. Prediction is a pure function; the stored schema hash
    guards against feature drift in persisted models.
    """

    weights: np.ndarray  # (n_classes, n_features + 1)
    mu: np.ndarray
    sigma: np.ndarray
    classes: tuple
    horizon: int
    schema: str = field(default_factory=classifier_schema_hash)
    metadata: dict = field(default_factory=dict)

    def check_schema(self) -> None:
        if self.schema != classifier_schema_hash():
            raise SchemaMismatchError(
                f"model schema {self.schema} != current {classifier_schema_hash()}"
            )

    def predict_proba(self, x: np.ndarray) -> np.ndarray:
        z = (x - self.mu) / self.sigma
        zb = np.concatenate([z, [1.0]])
        logits = self.weights @ zb
        logits -= logits.max()
        p = np.exp(logits)
        return p / p.sum()

    def predict_proba_batch(self, X: np.ndarray) -> np.ndarray:
        Z = (X - self.mu) / self.sigma
        Zb = np.concatenate([Z, np.ones((len(Z), 1))], axis=1)
        logits = Zb @ self.weights.T
        logits -= logits.max(axis=1, keepdims=True)
        P = np.exp(logits)
        return P / P.sum(axis=1, keepdims=True)


def _loss_and_grad(W: np.ndarray, Zb: np.ndarray, Y: np.ndarray, l2: float):
    """Mean cross-entropy with L2 on non-bias weights, and its gradient."""
    logits = Zb @ W.T
    logits -= logits.max(axis=1, keepdims=True)
    expl = np.exp(logits)
    P = expl / expl.sum(axis=1, keepdims=True)
    n = len(Zb)
    loss = -np.mean(np.log(np.clip((P * Y).sum(axis=1), 1e-12, None)))
    reg = W.copy()
    reg[:, -1] = 0.0
    loss += 0.5 * l2 * float((reg ** 2).sum())
    grad = (P - Y).T @ Zb / n + l2 * reg
    return loss, grad


def train_classifier(
    dataset: LabeledDataset,
    learning_rate: float = 0.1,
    l2: float = 1e-4,
    epochs: int = 500,
) -> ClassifierModel:
    """Fit the model by full-batch gradient descent; deterministic.

    Held-out accuracy is reported at end-of-episode timesteps (the
    headline number) and over all held-out examples.
    """
    classes = tuple(int(c) for c in np.unique(dataset.y))
    if len(classes) < 2:
        raise DegenerateDatasetError(f"need >= 2 classes, got {classes}")
    train = dataset.train_mask
    X_train = dataset.X[train]
    y_train = dataset.y[train]
    if len(np.unique(y_train)) < 2:
        raise DegenerateDatasetError("train split collapsed to a single class")
    mu = X_train.mean(axis=0)
    sigma = X_train.std(axis=0)
    sigma = np.where(sigma < 1e-8, 1.0, sigma)
    Zb = np.concatenate([(X_train - mu) / sigma, np.ones((len(X_train), 1))], axis=1)
    class_index = {c: k for k, c in enumerate(classes)}
    Y = np.zeros((len(y_train), len(classes)))
    Y[np.arange(len(y_train)), [class_index[int(v)] for v in y_train]] = 1.0

    W = np.zeros((len(classes), Zb.shape[1]))
    for _ in range(epochs):
        _, grad = _loss_and_grad(W, Zb, Y, l2)
        W -= learning_rate * grad

    model = ClassifierModel(
        weights=W, mu=mu, sigma=sigma, classes=classes, horizon=dataset.horizon
    )
    held = ~train
    meta = {
        "dataset_hash": dataset.dataset_hash(),
        "dataset_seed": dataset.seed,
        "n_train": int(train.sum()),
    }
    if held.any():
        P = model.predict_proba_batch(dataset.X[held])
        pred = np.array(classes)[P.argmax(axis=1)]
        meta["heldout_accuracy"] = float((pred == dataset.y[held]).mean())
        final_held = held & dataset.final_mask
        if final_held.any():
            Pf = model.predict_proba_batch(dataset.X[final_held])
            predf = np.array(classes)[Pf.argmax(axis=1)]
            meta["heldout_accuracy_final"] = float((predf == dataset.y[final_held]).mean())
    model.metadata = meta
    return model


def classify(
    model: ClassifierModel, history: TeamHistory, t: int, grid: GridMap
) -> np.ndarray:
    """Probability over evader levels from the history prefix up to t."""
    model.check_schema()
    return model.predict_proba(features_at(grid, history, t, model.horizon))


def classification_rate_curve(
    model: ClassifierModel, logs: list[EpisodeLog], grid: GridMap
) -> list[tuple[int, float]]:
    """Argmax accuracy at each timestep, averaged over the given logs.

    The true label is the evader level in each log header; episodes
    shorter than t drop out of that point's denominator.
    """
    model.check_schema()
    if not logs:
        raise EmptyLogSetError("no logs supplied")
    correct: dict[int, int] = {}
    total: dict[int, int] = {}
    classes = np.array(model.classes)
    for log in logs:
        label = log.evader_level()
        track = ObservationTrack(grid, model.horizon)
        for t, cell, hlp_pos, llp_pos in _log_track_rows(log):
            track.add_row(t, cell, hlp_pos, llp_pos)
            if t < 1:
                continue
            probs = model.predict_proba(track.features())
            pred = int(classes[int(np.argmax(probs))])
            total[t] = total.get(t, 0) + 1
            correct[t] = correct.get(t, 0) + (pred == label)
    return [(t, correct[t] / total[t]) for t in sorted(total)]


def accuracy_at_final(model: ClassifierModel, logs: list[EpisodeLog], grid: GridMap) -> float:
    """End-of-episode argmax accuracy over logs (episodes of length 0 skipped)."""
    model.check_schema()
    classes = np.array(model.classes)
    n = 0
    correct = 0
    for log in logs:
        if log.final_t < 1:
            continue
        track = ObservationTrack(grid, model.horizon)
        for t, cell, hlp_pos, llp_pos in _log_track_rows(log):
            track.add_row(t, cell, hlp_pos, llp_pos)
        probs = model.predict_proba(track.features())
        n += 1
        correct += int(classes[int(np.argmax(probs))]) == log.evader_level()
    if n == 0:
        raise EmptyLogSetError("no scorable logs")
    return correct / n
