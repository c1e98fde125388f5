"""Strict-mode policy evaluation on a fixed task set.

Evaluation uses deployment semantics: any collision ends the trial as a
task failure, independently of the relaxed collision handling used during
training. Metrics follow the usual navigation conventions: success rate
(SR), mean commanded linear velocity across all evaluation steps (AV),
mean episode length (AEL), and the mean navigation score (ANS) that
combines completion with time cost.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .episode import EventKind, classify_event
from .observe import raw_observation
from .world import (
    Action,
    RobotPose,
    Scenario,
    ScenarioConfig,
    SimParams,
    WorldMap,
    advance,
    raycast_scan,
    sample_scenario,
)

PolicyFn = Callable[[np.ndarray], Action]


def nav_score(outcome: str | EventKind, t_s: int, t_max: int) -> float:
    """1 - 2*T_s/T_max on success, -1 on any failure."""
    if EventKind(outcome) is EventKind.SUCCESS:
        if not 0 < t_s <= t_max:
            raise ValueError(f"success step count {t_s} outside (0, {t_max}]")
        return 1.0 - 2.0 * t_s / t_max
    return -1.0


@dataclass
class TaskRecord:
    task_index: int
    outcome: EventKind
    steps: int
    score: float
    n_collisions: int = 0
    trajectory: list[tuple[float, float, float]] | None = None


@dataclass
class EvalResult:
    sr: float
    av: float
    ael: float
    ans: float
    per_task: list[TaskRecord] = field(default_factory=list)


@dataclass
class LearningCurve:
    """Checkpoint evaluations at strictly increasing training steps."""

    points: list[tuple[int, EvalResult]] = field(default_factory=list)

    def append(self, step: int, result: EvalResult) -> None:
        if self.points and step <= self.points[-1][0]:
            raise ValueError("curve steps must be strictly increasing")
        self.points.append((step, result))

    def sr_series(self) -> list[tuple[int, float]]:
        return [(step, res.sr) for step, res in self.points]


def make_task_set(world: WorldMap, n_tasks: int, seed: int,
                  scen_cfg: ScenarioConfig) -> list[Scenario]:
    """Seed-derived fixed task set, shared across methods and checkpoints."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return [sample_scenario(world, rng, scen_cfg) for _ in range(n_tasks)]


def run_episode(policy: PolicyFn, world: WorldMap, scenario: Scenario,
                sim: SimParams, t_max: int, strict: bool = True,
                record_trajectory: bool = False) -> tuple[TaskRecord, float]:
    """One evaluation trial; returns the record and the summed commanded
    linear velocity (for the cross-episode AV aggregate)."""
    pose = scenario.start
    goal = scenario.goal
    scan = raycast_scan(world, pose, sim.lidar)
    v_prev, w_prev = 0.0, 0.0
    traj = [(pose.x, pose.y, pose.theta)] if record_trajectory else None
    outcome_kind = EventKind.TIMEOUT
    steps = t_max
    n_collisions = 0
    v_sum = 0.0
    for t in range(1, t_max + 1):
        raw = raw_observation(scan, pose, goal, v_prev, w_prev)
        action = policy(raw)
        out = advance(world, pose, action, sim.dt, sim.robot_radius, goal,
                      sim.goal_radius, sim.lidar, sim.n_substeps)
        v_sum += action.v
        event = classify_event(out, t, t_max)
        pose, scan = out.next_pose, out.scan
        v_prev, w_prev = action.v, action.w
        if record_trajectory:
            traj.append((pose.x, pose.y, pose.theta))
        if event is EventKind.COLLISION:
            n_collisions += 1
            if strict:
                outcome_kind, steps = EventKind.COLLISION, t
                break
        elif event is EventKind.SUCCESS:
            outcome_kind, steps = EventKind.SUCCESS, t
            break
    score = nav_score(outcome_kind, steps, t_max)
    rec = TaskRecord(task_index=0, outcome=outcome_kind, steps=steps,
                     score=score, n_collisions=n_collisions, trajectory=traj)
    return rec, v_sum


def run_eval(policy: PolicyFn, world: WorldMap, tasks: Sequence[Scenario],
             sim: SimParams, t_max: int, strict: bool = True,
             record_trajectories: bool = False) -> EvalResult:
    """Run every task once and aggregate SR / AV / AEL / ANS.

    AV averages the commanded linear velocity over all steps of all
    episodes, successes and failures alike; AEL averages steps per
    episode, counting failed episodes' steps as well. A trial counts as a
    success only when the goal is reached with zero collisions.
    """
    records = []
    v_total = 0.0
    step_total = 0
    for i, scenario in enumerate(tasks):
        rec, v_sum = run_episode(policy, world, scenario, sim, t_max, strict,
                                 record_trajectories)
        rec.task_index = i
        v_total += v_sum
        step_total += rec.steps
        records.append(rec)
    n = len(records)
    sr = sum(r.outcome is EventKind.SUCCESS and r.n_collisions == 0
             for r in records) / n
    av = v_total / step_total if step_total else 0.0
    ael = step_total / n
    ans = sum(r.score for r in records) / n
    return EvalResult(sr=sr, av=av, ael=ael, ans=ans, per_task=records)


def steps_to_threshold(curve: LearningCurve | Sequence[tuple[int, float]],
                       threshold: float) -> int | None:
    """First checkpoint step whose SR reaches the threshold, else None."""
    if not 0.0 < threshold < 1.0:
        raise ValueError("threshold must be in (0, 1)")
    if isinstance(curve, LearningCurve):
        series = curve.sr_series()
    else:
        series = [(step, sr.sr if isinstance(sr, EvalResult) else float(sr))
                  for step, sr in curve]
    for step, sr in series:
        if sr >= threshold:
            return step
    return None
