"""Collision-aware replay buffer.

Admission handles the two rules that keep value targets consistent when
an episode may span several collisions: the first non-collision step
after a collision is a *bridge* and is never stored, and (optionally)
collision transitions whose heading barely changed since the previous
collision candidate are dropped as redundant. Filtered candidates still
count toward the episode's collision budget; filtering affects replay
admission only.

Observations are stored raw (untransformed lidar) so the trainable
reciprocal offset re-derives network inputs at batch time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .episode import EventKind


def pose_delta(theta_t: float, theta_prev: float) -> float:
    """Absolute heading change in [0, pi], robust to angle wrapping."""
    return abs(math.atan2(math.sin(theta_t - theta_prev),
                          math.cos(theta_t - theta_prev)))


class AdmitDecision(str, Enum):
    STORE = "store"
    OMIT_BRIDGE = "omit_bridge"
    OMIT_POSE_FILTER = "omit_pose_filter"


@dataclass(frozen=True)
class Transition:
    obs: np.ndarray  # raw observation (lidar in meters + goal/velocity block)
    action: np.ndarray  # (2,) commanded (v, w)
    reward: float
    next_obs: np.ndarray
    done: int  # 1 iff event is success or collision
    event: EventKind
    heading: float  # robot heading the action was taken from
    episode: int = 0


@dataclass
class PoseFilterState:
    """Per-episode state of the heading-change collision filter."""

    enabled: bool = False
    tau: float = math.radians(3.0)
    theta_prev: float | None = None  # heading at the last collision candidate

    def reset(self) -> None:
        self.theta_prev = None


@dataclass
class CollisionStats:
    """Cumulative admission counters over a training run."""

    total_generated: int = 0
    collision_candidates: int = 0
    pf_filtered: int = 0
    bridge_omitted: int = 0

    @property
    def stored_total(self) -> int:
        return self.total_generated - self.pf_filtered - self.bridge_omitted

    @property
    def stored_collisions(self) -> int:
        return self.collision_candidates - self.pf_filtered

    def report(self) -> dict:
        """Ratios in percent; the candidate ratio is given over both the
        generated-transition and stored-transition denominators."""
        gen = self.total_generated
        cand = self.collision_candidates
        stored = self.stored_total
        return {
            "total_generated": gen,
            "collision_candidates": cand,
            "pf_filtered": self.pf_filtered,
            "bridge_omitted": self.bridge_omitted,
            "stored_total": stored,
            "stored_collisions": self.stored_collisions,
            "candidate_ratio_pct": 100.0 * cand / gen if gen else 0.0,
            "candidate_ratio_stored_pct":
                100.0 * cand / stored if stored else 0.0,
            "pf_filtered_ratio_pct":
                100.0 * self.pf_filtered / cand if cand else 0.0,
            "stored_collision_ratio_pct":
                100.0 * self.stored_collisions / stored if stored else 0.0,
        }


def admit(tr: Transition, bridge_flag: int,
          pf: PoseFilterState) -> AdmitDecision:
    """Decide whether a transition enters the buffer.

    Bridge transitions are always omitted. A collision candidate is
    pose-filtered when the filter is armed, a reference heading exists,
    and the wrapped heading change falls below the threshold; every
    candidate (stored or filtered) becomes the new reference heading.
    """
    if bridge_flag:
        return AdmitDecision.OMIT_BRIDGE
    if tr.event is not EventKind.COLLISION:
        return AdmitDecision.STORE
    decision = AdmitDecision.STORE
    if (pf.enabled and pf.theta_prev is not None
            and pose_delta(tr.heading, pf.theta_prev) < pf.tau):
        decision = AdmitDecision.OMIT_POSE_FILTER
    pf.theta_prev = tr.heading
    return decision


@dataclass
class Batch:
    obs: np.ndarray
    action: np.ndarray
    reward: np.ndarray
    next_obs: np.ndarray
    done: np.ndarray

    def __len__(self) -> int:
        return len(self.reward)


class ReplayBuffer:
    """FIFO ring buffer with uniform minibatch sampling.

    Single-writer; storage grows geometrically up to the configured
    capacity so short runs never allocate the full ring.
    """

    def __init__(self, capacity: int = 1_000_000, obs_dim: int = 28,
                 act_dim: int = 2):
        if capacity <= 0:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.size = 0
        self._next = 0  # ring write index
        self._alloc = 0
        self._obs = self._act = self._rew = self._obs2 = self._done = None
        self.stats = CollisionStats()

    def _ensure(self, needed: int) -> None:
        if needed <= self._alloc:
            return
        new_alloc = max(4096, self._alloc * 2)
        while new_alloc < needed:
            new_alloc *= 2
        new_alloc = min(new_alloc, self.capacity)

        def grow(old, shape):
            new = np.empty(shape, dtype=float)
            if old is not None:
                new[: self.size] = old[: self.size]
            return new

        self._obs = grow(self._obs, (new_alloc, self.obs_dim))
        self._act = grow(self._act, (new_alloc, self.act_dim))
        self._rew = grow(self._rew, (new_alloc,))
        self._obs2 = grow(self._obs2, (new_alloc, self.obs_dim))
        self._done = grow(self._done, (new_alloc,))
        self._alloc = new_alloc

    def push(self, tr: Transition) -> None:
        """Append an admitted transition; evicts the oldest at capacity."""
        self._ensure(min(self.size + 1, self.capacity))
        i = self._next
        self._obs[i] = tr.obs
        self._act[i] = tr.action
        self._rew[i] = tr.reward
        self._obs2[i] = tr.next_obs
        self._done[i] = tr.done
        self._next = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)
        self.stats.total_generated += 1
        if tr.event is EventKind.COLLISION:
            self.stats.collision_candidates += 1

    def offer(self, tr: Transition, bridge_flag: int,
              pf: PoseFilterState) -> AdmitDecision:
        """Run admission for one generated transition and store if allowed."""
        decision = admit(tr, bridge_flag, pf)
        if decision is AdmitDecision.STORE:
            self.push(tr)
        elif decision is AdmitDecision.OMIT_BRIDGE:
            self.stats.total_generated += 1
            self.stats.bridge_omitted += 1
        else:
            self.stats.total_generated += 1
            self.stats.collision_candidates += 1
            self.stats.pf_filtered += 1
        return decision

    def sample_minibatch(self, batch_size: int,
                         rng: np.random.Generator) -> Batch | None:
        """Uniform sample without replacement; None signals no update."""
        if self.size < batch_size:
            return None
        idx = rng.choice(self.size, size=batch_size, replace=False)
        return Batch(obs=self._obs[idx], action=self._act[idx],
                     reward=self._rew[idx], next_obs=self._obs2[idx],
                     done=self._done[idx])

    def stats_report(self) -> dict:
        return self.stats.report()

    def __len__(self) -> int:
        return self.size
