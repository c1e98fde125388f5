"""Policy input construction and reward computation.

The observation vector is [l_hat_1..l_hat_m, d_g, phi_g, v, w]: lidar
readings squashed through the trainable reciprocal transform
1 / (l_bar - beta), then goal distance (m), goal bearing in the body frame
(rad, (-pi, pi]), and the current velocity command. Replayed experience
stores the raw readings so the transform can be re-applied with the
current beta at batch time.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import wrap_angle
from .world import LidarScan, RobotPose

EPS_BETA = 0.05  # singularity margin for the reciprocal transform (m)


@dataclass
class TransformParam:
    """Trainable offset of the reciprocal lidar transform."""

    beta: float = 0.0
    eps: float = EPS_BETA


@dataclass(frozen=True)
class RewardParams:
    r_success: float = 10.0
    r_collision: float = -10.0
    c1: float = 5.0  # progress shaping gain per meter

    def __post_init__(self):
        if not self.r_success > 0.0 > self.r_collision:
            raise ValueError("need r_success > 0 > r_collision")


def reciprocal_transform(l_bar, param: TransformParam):
    """Apply 1 / (l_bar - beta), clamping the denominator at param.eps.

    Accepts scalars or arrays. The clamp guards the singularity at
    l_bar == beta; clamped entries have zero gradient w.r.t. beta.
    """
    denom = np.maximum(np.asarray(l_bar, dtype=float) - param.beta, param.eps)
    out = 1.0 / denom
    if np.isscalar(l_bar) or np.ndim(l_bar) == 0:
        return float(out)
    return out


def transform_was_clamped(l_bar, param: TransformParam) -> bool:
    return bool(np.any(np.asarray(l_bar, dtype=float) - param.beta
                       < param.eps))


def goal_polar(pose: RobotPose, goal: tuple[float, float]) -> tuple[float, float]:
    """Distance and body-frame bearing to the goal."""
    dx = goal[0] - pose.x
    dy = goal[1] - pose.y
    d_g = math.hypot(dx, dy)
    phi_g = wrap_angle(math.atan2(dy, dx) - pose.theta)
    return d_g, phi_g


def raw_observation(scan: LidarScan, pose: RobotPose,
                    goal: tuple[float, float], v: float, w: float) -> np.ndarray:
    """Untransformed observation [l_bar..., d_g, phi_g, v, w].

    This is the form stored in replay; apply ``transform_observation``
    (or build_observation directly) to obtain the network input.
    """
    d_g, phi_g = goal_polar(pose, goal)
    return np.concatenate([scan.ranges, [d_g, phi_g, v, w]])


def transform_observation(raw: np.ndarray, n_beams: int,
                          param: TransformParam) -> np.ndarray:
    """Reciprocal-transform the lidar block of raw observation row(s)."""
    out = np.array(raw, dtype=float, copy=True)
    if out.ndim == 1:
        out[:n_beams] = reciprocal_transform(out[:n_beams], param)
    else:
        out[:, :n_beams] = reciprocal_transform(out[:, :n_beams], param)
    return out


def build_observation(scan: LidarScan, pose: RobotPose,
                      goal: tuple[float, float], v: float, w: float,
                      param: TransformParam) -> np.ndarray:
    """Network-ready state vector in the order [l_hat..., d_g, phi_g, v, w]."""
    raw = raw_observation(scan, pose, goal, v, w)
    return transform_observation(raw, len(scan.ranges), param)


def compute_reward(event: str, d_g_t: float, d_g_next: float,
                   params: RewardParams) -> float:
    """Terminal payouts for success/collision, else progress shaping."""
    if event == "success":
        return params.r_success
    if event == "collision":
        return params.r_collision
    return params.c1 * (d_g_t - d_g_next)
