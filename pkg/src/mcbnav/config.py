"""Experiment configuration: YAML files, overrides, hashing, seed streams.

One structured file describes a full experiment (method, budget, seeds,
world and learner settings). CLI flags override individual fields. Every
artifact written by a run embeds the hash of the resolved configuration
so results remain traceable to exact settings.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .observe import RewardParams
from .sac import LearnerConfig
from .world import LidarConfig, ScenarioConfig, SimParams

METHODS = ("SCR", "MCB", "MCB-PF")

# Named seed streams split from each run seed, in spawn order.
STREAMS = ("net_init", "scenario", "policy", "sampler")


class ConfigError(ValueError):
    """Invalid experiment configuration (exit code 2 at the CLI)."""


DEFAULTS: dict = {
    "name": "experiment",
    "method": "MCB",
    "k": 2,
    "tau_deg": None,
    "seeds": [0, 1, 2, 3, 4],
    "total_steps": 15_000,
    "eval_every": 1_000,
    "t_max": 200,
    "map": "desk_clutter",
    "world": {
        "n_beams": 24,
        "fov_deg": 270.0,
        "max_range": 6.0,
        "dt": 0.2,
        "robot_radius": 0.17,
        "goal_radius": 0.3,
        "n_substeps": 10,
        "min_start_goal_dist": 2.5,
    },
    "reward": {"r_success": 10.0, "r_collision": -10.0, "c1": 5.0},
    "sac": {
        "gamma": 0.99,
        "lr_actor": 3.0e-4,
        "lr_critic": 3.0e-4,
        "lr_alpha": 3.0e-4,
        "rho": 0.995,
        "batch_size": 128,
        "auto_alpha": True,
        "alpha_init": 0.2,
        "hidden": [100, 100, 100],
        "activation": "relu",
    },
    "replay": {"capacity": 1_000_000, "warmup": 1_000},
    "eval": {
        "n_tasks": 50,
        "task_seed": 7_341,
        "record_final_trajectories": True,
    },
}

# The paper-scale profile mirrors the reference training budget; the desk
# profile is sized for a workstation CPU.
PROFILES = {
    "desk": {"total_steps": 15_000, "eval_every": 1_000,
             "seeds": [0, 1, 2, 3, 4]},
    "paper": {"total_steps": 50_000, "eval_every": 2_500,
              "seeds": list(range(10))},
}


def _deep_update(base: dict, extra: dict) -> dict:
    for key, value in extra.items():
        if (isinstance(value, dict) and isinstance(base.get(key), dict)):
            _deep_update(base[key], value)
        else:
            base[key] = value
    return base


@dataclass
class ExperimentConfig:
    raw: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict, profile: str | None = None
                  ) -> "ExperimentConfig":
        merged = copy.deepcopy(DEFAULTS)
        if profile is not None:
            if profile not in PROFILES:
                raise ConfigError(f"unknown profile {profile!r}; "
                                  f"choose from {sorted(PROFILES)}")
            _deep_update(merged, copy.deepcopy(PROFILES[profile]))
        _deep_update(merged, copy.deepcopy(data or {}))
        cfg = cls(raw=merged)
        cfg.validate()
        return cfg

    @classmethod
    def from_file(cls, path: str | Path, profile: str | None = None
                  ) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                data = yaml.safe_load(fh)
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"malformed YAML in {path}: {exc}") from exc
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{path}: config must be a mapping")
        return cls.from_dict(data, profile=profile)

    def apply_overrides(self, overrides: list[str]) -> "ExperimentConfig":
        """Apply ``dotted.key=value`` overrides (values parsed as YAML)."""
        data = copy.deepcopy(self.raw)
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r} is not key=value")
            key, _, value = item.partition("=")
            node = data
            parts = key.strip().split(".")
            for part in parts[:-1]:
                if part not in node or not isinstance(node[part], dict):
                    node[part] = {}
                node = node[part]
            node[parts[-1]] = yaml.safe_load(value)
        cfg = ExperimentConfig(raw=data)
        cfg.validate()
        return cfg

    # -- validation ------------------------------------------------------

    def validate(self) -> None:
        r = self.raw
        if r["method"] not in METHODS:
            raise ConfigError(f"method must be one of {METHODS}, "
                              f"got {r['method']!r}")
        if r["method"] == "MCB-PF" and r.get("tau_deg") is None:
            raise ConfigError("MCB-PF requires tau_deg")
        if r["method"] != "SCR":
            if not isinstance(r["k"], int) or r["k"] < 1:
                raise ConfigError(f"k must be a positive integer, "
                                  f"got {r['k']!r}")
        if not r["seeds"]:
            raise ConfigError("seeds must be a non-empty list")
        if len(set(r["seeds"])) != len(r["seeds"]):
            raise ConfigError("seeds must be unique")
        total, every = r["total_steps"], r["eval_every"]
        if total <= 0 or every <= 0 or total % every != 0:
            raise ConfigError(
                f"eval_every ({every}) must divide total_steps ({total})")
        if r["t_max"] < 1:
            raise ConfigError("t_max must be >= 1")

    # -- resolved views --------------------------------------------------

    @property
    def method(self) -> str:
        return self.raw["method"]

    @property
    def effective_k(self) -> int:
        """Collision budget actually used; SCR is exactly budget 1."""
        return 1 if self.method == "SCR" else int(self.raw["k"])

    @property
    def pf_enabled(self) -> bool:
        return self.method == "MCB-PF"

    @property
    def tau_deg(self) -> float | None:
        return self.raw.get("tau_deg") if self.pf_enabled else None

    @property
    def label(self) -> str:
        if self.method == "SCR":
            return "SCR"
        if self.method == "MCB":
            return f"MCB-K{self.effective_k}"
        return f"MCB-K{self.effective_k}-PF{self.raw['tau_deg']:g}"

    def resolved(self) -> dict:
        """Canonical dict actually consumed by a run (SCR pins k=1)."""
        data = copy.deepcopy(self.raw)
        data["k"] = self.effective_k
        if not self.pf_enabled:
            data["tau_deg"] = None
        return data

    def config_hash(self) -> str:
        blob = json.dumps(self.resolved(), sort_keys=True,
                          separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def lidar_config(self) -> LidarConfig:
        w = self.raw["world"]
        return LidarConfig(n_beams=int(w["n_beams"]),
                           fov=math.radians(float(w["fov_deg"])),
                           max_range=float(w["max_range"]))

    def sim_params(self) -> SimParams:
        w = self.raw["world"]
        return SimParams(dt=float(w["dt"]),
                         robot_radius=float(w["robot_radius"]),
                         goal_radius=float(w["goal_radius"]),
                         n_substeps=int(w["n_substeps"]),
                         lidar=self.lidar_config())

    def scenario_config(self) -> ScenarioConfig:
        w = self.raw["world"]
        return ScenarioConfig(
            robot_radius=float(w["robot_radius"]),
            goal_radius=float(w["goal_radius"]),
            min_start_goal_dist=float(w["min_start_goal_dist"]))

    def reward_params(self) -> RewardParams:
        r = self.raw["reward"]
        return RewardParams(r_success=float(r["r_success"]),
                            r_collision=float(r["r_collision"]),
                            c1=float(r["c1"]))

    def learner_config(self) -> LearnerConfig:
        w = self.raw["world"]
        obs_dim = int(w["n_beams"]) + 4
        sac = dict(self.raw["sac"])
        sac["hidden"] = tuple(sac.get("hidden", (100, 100, 100)))
        return LearnerConfig(obs_dim=obs_dim, n_beams=int(w["n_beams"]),
                             min_lidar=float(w["robot_radius"]), **sac)

    def tau_rad(self) -> float:
        return math.radians(float(self.raw["tau_deg"])) if self.pf_enabled \
            else 0.0


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Split one run seed into the documented independent streams."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(child)
            for name, child in zip(STREAMS, children)}


def write_resolved_config(cfg: ExperimentConfig, path: Path) -> None:
    data = cfg.resolved()
    data["config_hash"] = cfg.config_hash()
    with open(path, "w") as fh:
        yaml.safe_dump(data, fh, sort_keys=True)
