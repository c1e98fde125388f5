"""Training loop wiring the simulator, episode manager, replay, and SAC.

One run = one (config, seed) pair. The loop interleaves a single rollout
thread with one gradient step per environment step and writes the full
run log: per-step scalars, per-checkpoint evaluations and replay stats,
per-episode traces, scenario dumps and checkpoints.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .config import ExperimentConfig, seed_streams, write_resolved_config
from .episode import EventKind, begin_episode, classify_event, on_step
from .evalkit import make_task_set, run_eval
from .observe import compute_reward, goal_polar, raw_observation
from .replay import PoseFilterState, ReplayBuffer, Transition
from .sac import SACLearner
from .world import raycast_scan, resolve_map, sample_scenario, advance

EVAL_CSV_COLUMNS = ("step", "sr", "av", "ael", "ans", "seed", "method",
                    "k", "tau_deg")
STATS_CSV_COLUMNS = ("step", "total_generated", "collision_candidates",
                     "candidate_ratio_pct", "pf_filtered",
                     "pf_filtered_ratio_pct", "bridge_omitted",
                     "stored_total", "stored_collisions",
                     "stored_collision_ratio_pct",
                     "candidate_ratio_stored_pct")
SCALAR_CSV_COLUMNS = ("step", "episode", "event", "reward", "critic1",
                      "critic2", "actor", "temperature", "alpha", "beta")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


class _CsvLog:
    def __init__(self, path: Path, columns, config_hash: str):
        self._fh = open(path, "w", newline="")
        self._fh.write(f"# config_hash: {config_hash}\n")
        self._writer = csv.writer(self._fh)
        self._writer.writerow(columns)
        self._columns = columns

    def row(self, values: dict) -> None:
        self._writer.writerow([_fmt(values.get(c)) for c in self._columns])

    def close(self) -> None:
        self._fh.close()


@dataclass
class RunHandle:
    run_dir: Path
    config_hash: str
    seed: int
    label: str


def run_is_complete(run_dir: Path, config_hash: str | None = None) -> bool:
    done = run_dir / "done.json"
    if not done.exists():
        return False
    try:
        data = json.loads(done.read_text())
    except (OSError, json.JSONDecodeError):
        return False
    if config_hash is not None and data.get("config_hash") != config_hash:
        return False
    return True


def train_run(cfg: ExperimentConfig, seed: int, run_dir: Path,
              progress=None) -> RunHandle:
    """Execute one seed of an experiment, writing the run log to run_dir."""
    run_dir = Path(run_dir)
    run_dir.mkdir(parents=True, exist_ok=True)
    (run_dir / "checkpoints").mkdir(exist_ok=True)
    config_hash = cfg.config_hash()
    write_resolved_config(cfg, run_dir / "config.yaml")
    meta = {"config_hash": config_hash, "seed": seed, "label": cfg.label,
            "method": cfg.method, "k": cfg.effective_k,
            "tau_deg": cfg.tau_deg, "code_version": __version__}
    (run_dir / "run_meta.json").write_text(
        json.dumps(meta, sort_keys=True, indent=1) + "\n")

    rngs = seed_streams(seed)
    world = resolve_map(cfg.raw["map"])
    sim = cfg.sim_params()
    scen_cfg = cfg.scenario_config()
    reward_params = cfg.reward_params()
    t_max = int(cfg.raw["t_max"])
    k = cfg.effective_k
    total_steps = int(cfg.raw["total_steps"])
    eval_every = int(cfg.raw["eval_every"])
    warmup = int(cfg.raw["replay"]["warmup"])

    learner = SACLearner(cfg.learner_config(), rngs["net_init"])
    batch_size = learner.config.batch_size
    buffer = ReplayBuffer(capacity=int(cfg.raw["replay"]["capacity"]),
                          obs_dim=learner.config.obs_dim)
    pf = PoseFilterState(enabled=cfg.pf_enabled, tau=cfg.tau_rad())

    tasks = make_task_set(world, int(cfg.raw["eval"]["n_tasks"]),
                          int(cfg.raw["eval"]["task_seed"]), scen_cfg)

    scalars = _CsvLog(run_dir / "scalars.csv", SCALAR_CSV_COLUMNS,
                      config_hash)
    eval_log = _CsvLog(run_dir / "eval.csv", EVAL_CSV_COLUMNS, config_hash)
    stats_log = _CsvLog(run_dir / "stats.csv", STATS_CSV_COLUMNS,
                        config_hash)
    traces_fh = open(run_dir / "traces.jsonl", "w")
    scen_fh = open(run_dir / "scenarios.jsonl", "w")

    def new_episode(index: int):
        scenario = sample_scenario(world, rngs["scenario"], scen_cfg)
        scen_fh.write(json.dumps(
            {"episode": index, **scenario.to_dict()}, sort_keys=True) + "\n")
        state = begin_episode(scenario, t_max)
        pf.reset()
        scan = raycast_scan(world, scenario.start, sim.lidar)
        return scenario, state, scan

    episode_idx = 0
    scenario, ep, scan = new_episode(episode_idx)
    pose = scenario.start
    v_prev = w_prev = 0.0
    trace = {"events": [], "d": [], "bridge": [], "admit": [], "c": []}
    ep_return = 0.0

    def flush_trace(reason: str):
        traces_fh.write(json.dumps(
            {"episode": episode_idx, "len": ep.t, "return": ep_return,
             "reset": reason, **trace}, sort_keys=True) + "\n")

    def run_checkpoint_eval(step: int):
        policy = (lambda obs: learner.act(obs, deterministic=True))
        final = step == total_steps
        record = final and bool(cfg.raw["eval"]["record_final_trajectories"])
        result = run_eval(policy, world, tasks, sim, t_max, strict=True,
                          record_trajectories=record)
        eval_log.row({"step": step, "sr": result.sr, "av": result.av,
                      "ael": result.ael, "ans": result.ans, "seed": seed,
                      "method": cfg.method, "k": k,
                      "tau_deg": cfg.tau_deg})
        stats_log.row({"step": step, **buffer.stats_report()})
        learner.save_checkpoint(
            run_dir / "checkpoints" / f"ckpt_{step:06d}.npz", step=step)
        if record:
            with open(run_dir / "trajectories.jsonl", "w") as fh:
                for rec in result.per_task:
                    fh.write(json.dumps(
                        {"task": rec.task_index,
                         "outcome": rec.outcome.value,
                         "steps": rec.steps, "score": rec.score,
                         "start": tasks[rec.task_index].to_dict()["start"],
                         "goal": list(tasks[rec.task_index].goal),
                         "poses": rec.trajectory}, sort_keys=True) + "\n")
        if progress is not None:
            progress(step, result)
        return result

    for step in range(1, total_steps + 1):
        obs_raw = raw_observation(scan, pose, scenario.goal, v_prev, w_prev)
        action = learner.act(obs_raw, rng=rngs["policy"])
        out = advance(world, pose, action, sim.dt, sim.robot_radius,
                      scenario.goal, sim.goal_radius, sim.lidar,
                      sim.n_substeps)
        event = classify_event(out, ep.t + 1, t_max)
        d_now, _ = goal_polar(pose, scenario.goal)
        d_next, _ = goal_polar(out.next_pose, scenario.goal)
        reward = compute_reward(event.value, d_now, d_next, reward_params)
        next_obs_raw = raw_observation(out.scan, out.next_pose,
                                       scenario.goal, action.v, action.w)
        ep, directive = on_step(ep, event, k)
        tr = Transition(obs=obs_raw, action=np.array([action.v, action.w]),
                        reward=reward, next_obs=next_obs_raw,
                        done=directive.terminal, event=event,
                        heading=pose.theta, episode=episode_idx)
        decision = buffer.offer(tr, directive.bridge, pf)

        ep_return += reward
        trace["events"].append(event.value)
        trace["d"].append(directive.terminal)
        trace["bridge"].append(directive.bridge)
        trace["admit"].append(decision.value)
        trace["c"].append(ep.c)

        losses = {}
        if len(buffer) >= max(warmup, batch_size):
            batch = buffer.sample_minibatch(batch_size, rngs["sampler"])
            if batch is not None:
                losses = learner.update(batch, rngs["policy"])
        scalars.row({"step": step, "episode": episode_idx,
                     "event": event.value, "reward": reward, **losses})

        if directive.reset is not None:
            flush_trace(directive.reset.value)
            episode_idx += 1
            scenario, ep, scan = new_episode(episode_idx)
            pose = scenario.start
            v_prev = w_prev = 0.0
            trace = {"events": [], "d": [], "bridge": [], "admit": [],
                     "c": []}
            ep_return = 0.0
        else:
            pose, scan = out.next_pose, out.scan
            v_prev, w_prev = action.v, action.w

        if step % eval_every == 0:
            run_checkpoint_eval(step)

    if ep.t > 0:
        flush_trace("end_of_run")
    scalars.close()
    eval_log.close()
    stats_log.close()
    traces_fh.close()
    scen_fh.close()
    (run_dir / "done.json").write_text(json.dumps(
        {"config_hash": config_hash, "seed": seed,
         "total_steps": total_steps}, sort_keys=True) + "\n")
    return RunHandle(run_dir=run_dir, config_hash=config_hash, seed=seed,
                     label=cfg.label)
