"""Versioned JSON persistence for policies, libraries, and models.

Every artifact embeds a format version, the feature-schema hash it was
built under, and the seeds/config hashes needed to regenerate it. Loading
is strict: version or schema mismatches raise instead of guessing.
"""

from __future__ import annotations

import ast
import json
from pathlib import Path

import numpy as np

from .controller import ControllerConfig
from .classifier import ClassifierModel, classifier_schema_hash
from .errors import SchemaMismatchError, VersionMismatchError
from .policies import Policy, feature_schema_hash
from .scenario import SamplerSpec, Scenario
from .training import LevelLibrary, RewardSpec, TrainConfig
from .world import Role

POLICY_VERSION = 1
LIBRARY_VERSION = 1
MODEL_VERSION = 1


def _dump(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, sort_keys=True, indent=1) + "\n")


def _load(path: Path, kind: str, version: int) -> dict:
    payload = json.loads(Path(path).read_text())
    if payload.get("kind") != kind:
        raise VersionMismatchError(f"{path}: expected a {kind} document")
    if payload.get("format_version") != version:
        raise VersionMismatchError(
            f"{path}: {kind} version {payload.get('format_version')}, supported {version}"
        )
    return payload


def save_policy(policy: Policy, path) -> None:
    payload = {
        "kind": "policy",
        "format_version": POLICY_VERSION,
        "role": policy.role.value,
        "level": policy.level,
        "policy_kind": policy.kind,
        "seed": policy.seed,
        "epsilon0": policy.epsilon0,
        "fixed_action": policy.fixed_action,
        "schema": policy.schema,
        "params": [[repr(k), list(v)] for k, v in sorted(policy.params.items(), key=lambda kv: repr(kv[0]))],
    }
    _dump(Path(path), payload)


def load_policy(path) -> Policy:
    payload = _load(Path(path), "policy", POLICY_VERSION)
    if payload["schema"] != feature_schema_hash():
        raise SchemaMismatchError(
            f"{path}: policy built under schema {payload['schema']}, "
            f"current {feature_schema_hash()}"
        )
    params = {ast.literal_eval(k): list(v) for k, v in payload["params"]}
    return Policy(
        role=Role(payload["role"]),
        level=payload["level"],
        kind=payload["policy_kind"],
        seed=payload["seed"],
        epsilon0=payload["epsilon0"],
        fixed_action=payload["fixed_action"],
        params=params,
        schema=payload["schema"],
    )


def save_library(library: LevelLibrary, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    files = {}
    for i, policy in enumerate(library.evaders):
        name = f"evader_{i}.json"
        save_policy(policy, directory / name)
        files[f"evader_{i}"] = name
    for i, (hlp, llp) in enumerate(library.pursuer_pairs):
        for tag, policy in (("hlp", hlp), ("llp", llp)):
            name = f"pursuer_{tag}_{i}.json"
            save_policy(policy, directory / name)
            files[f"pursuer_{tag}_{i}"] = name
    manifest = {
        "kind": "library",
        "format_version": LIBRARY_VERSION,
        "K": library.K,
        "seed": library.seed,
        "reward": library.reward.to_dict(),
        "config": library.config.to_dict(),
        "provenance": library.provenance,
        "files": files,
    }
    _dump(directory / "manifest.json", manifest)


def load_library(directory) -> LevelLibrary:
    directory = Path(directory)
    manifest = _load(directory / "manifest.json", "library", LIBRARY_VERSION)
    K = manifest["K"]
    evaders = [load_policy(directory / manifest["files"][f"evader_{i}"]) for i in range(K + 1)]
    pairs = [
        (
            load_policy(directory / manifest["files"][f"pursuer_hlp_{i}"]),
            load_policy(directory / manifest["files"][f"pursuer_llp_{i}"]),
        )
        for i in range(K + 1)
    ]
    return LevelLibrary(
        K=K,
        evaders=evaders,
        pursuer_pairs=pairs,
        provenance=manifest["provenance"],
        reward=RewardSpec.from_dict(manifest["reward"]),
        config=TrainConfig.from_dict(manifest["config"]),
        seed=manifest["seed"],
    )


def save_model(model: ClassifierModel, path) -> None:
    payload = {
        "kind": "classifier",
        "format_version": MODEL_VERSION,
        "schema": model.schema,
        "classes": list(model.classes),
        "horizon": model.horizon,
        "weights": model.weights.tolist(),
        "mu": model.mu.tolist(),
        "sigma": model.sigma.tolist(),
        "metadata": model.metadata,
    }
    _dump(Path(path), payload)


def load_model(path) -> ClassifierModel:
    payload = _load(Path(path), "classifier", MODEL_VERSION)
    if payload["schema"] != classifier_schema_hash():
        raise SchemaMismatchError(
            f"{path}: model built under schema {payload['schema']}, "
            f"current {classifier_schema_hash()}"
        )
    return ClassifierModel(
        weights=np.array(payload["weights"]),
        mu=np.array(payload["mu"]),
        sigma=np.array(payload["sigma"]),
        classes=tuple(payload["classes"]),
        horizon=payload["horizon"],
        schema=payload["schema"],
        metadata=payload["metadata"],
    )


class RunSettings:
    """Shared experiment settings loaded from a JSON config document.

    Optional keys: ``horizon``, ``hlp_radius``, ``ground_radius``,
    ``reward`` (weights), ``controller`` (theta/dwell/initial_level),
    ``sampler`` (min_separation/pursuer_edge_col), ``fixed`` (explicit
    spawn cells), ``seed``. Command-line flags override file values.
    """

    def __init__(self, data: dict | None = None):
        data = data or {}
        known = {"horizon", "hlp_radius", "ground_radius", "reward", "controller",
                 "sampler", "fixed", "seed"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        self.horizon = data.get("horizon", 100)
        self.hlp_radius = data.get("hlp_radius", 4)
        self.ground_radius = data.get("ground_radius", 2)
        self.reward = RewardSpec.from_dict(data["reward"]) if "reward" in data else RewardSpec()
        self.controller = (
            ControllerConfig.from_dict(data["controller"]) if "controller" in data else ControllerConfig()
        )
        sampler = data.get("sampler", {})
        self.sampler = SamplerSpec(
            min_separation=sampler.get("min_separation"),
            pursuer_spawn=sampler.get("pursuer_spawn", "border"),
            pursuer_edge_col=sampler.get("pursuer_edge_col", 0),
            fixed_hlp=tuple(sampler["fixed_hlp"]) if sampler.get("fixed_hlp") else None,
            fixed_llp=tuple(sampler["fixed_llp"]) if sampler.get("fixed_llp") else None,
            evader_keepout=sampler.get("evader_keepout", 0),
            horizon=self.horizon,
            hlp_radius=self.hlp_radius,
            ground_radius=self.ground_radius,
        )
        self.fixed = data.get("fixed")
        self.seed = data.get("seed")

    @classmethod
    def from_file(cls, path) -> "RunSettings":
        return cls(json.loads(Path(path).read_text()))

    def fixed_scenario(self) -> Scenario | None:
        if not self.fixed:
            return None
        f = self.fixed
        return Scenario(
            hlp_start=tuple(f["hlp"]),
            llp_start=tuple(f["llp"]),
            evader_start=tuple(f["evader"]),
            evader_goal=tuple(f["goal"]),
            horizon=self.horizon,
            hlp_radius=self.hlp_radius,
            ground_radius=self.ground_radius,
        )
