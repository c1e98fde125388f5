"""Soft actor-critic over the from-scratch dense networks.

Twin critics with soft target copies, a squashed-Gaussian policy mapped
affinely into the velocity box, auto-tuned entropy temperature, and the
trainable lidar-transform offset updated through the actor loss. One
gradient step services one environment step.

All gradients here are hand-derived; the test suite pins each against
central finite differences.
"""
from __future__ import annotations

import io
import json
import math
import zipfile
from dataclasses import asdict, dataclass, field

import numpy as np

from .nets import MLP, Adam, polyak_update
from .observe import EPS_BETA, TransformParam, transform_observation
from .world import Action

ACTION_LOW = np.array([0.0, -math.pi / 2.0])
ACTION_HIGH = np.array([0.5, math.pi / 2.0])
ACTION_CENTER = (ACTION_HIGH + ACTION_LOW) / 2.0
ACTION_SCALE = (ACTION_HIGH - ACTION_LOW) / 2.0

CHECKPOINT_VERSION = 1


class NumericalError(RuntimeError):
    """A loss or parameter went non-finite; training cannot continue."""


class CheckpointError(RuntimeError):
    """Unreadable, truncated, or incompatible checkpoint file."""


@dataclass
class LearnerConfig:
    obs_dim: int = 28
    n_beams: int = 24
    act_dim: int = 2
    hidden: tuple[int, ...] = (100, 100, 100)
    activation: str = "relu"
    gamma: float = 0.99
    lr_actor: float = 3e-4
    lr_critic: float = 3e-4
    lr_alpha: float = 3e-4
    lr_beta: float = 1e-4  # transform offset drifts if driven as hard
    #                        as the networks; 0 freezes it
    rho: float = 0.995  # soft target blend kept toward the old target
    batch_size: int = 128
    auto_alpha: bool = True
    alpha_init: float = 0.2
    target_entropy: float | None = None  # defaults to -act_dim
    log_std_min: float = -20.0
    log_std_max: float = 2.0
    squash_eps: float = 1e-6
    beta_init: float = 0.0
    beta_eps: float = EPS_BETA
    min_lidar: float = 0.17  # smallest observable reading; bounds beta

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")
        if not 0.0 < self.rho < 1.0:
            raise ValueError("rho must be in (0, 1)")
        if self.target_entropy is None:
            self.target_entropy = -float(self.act_dim)
        self.hidden = tuple(self.hidden)

    @property
    def beta_max(self) -> float:
        return self.min_lidar - self.beta_eps


@dataclass
class PolicyOutput:
    mean: np.ndarray  # pre-squash Gaussian mean (batch, act_dim)
    log_std: np.ndarray
    pre_squash: np.ndarray  # sampled u before tanh
    action: np.ndarray  # squashed and mapped into the velocity box
    log_prob: np.ndarray  # (batch,) including squash + affine corrections


def map_to_box(t: np.ndarray) -> np.ndarray:
    return ACTION_CENTER + ACTION_SCALE * t


class SACLearner:
    def __init__(self, config: LearnerConfig, rng: np.random.Generator):
        self.config = config
        c = config
        self.actor = MLP([c.obs_dim, *c.hidden, 2 * c.act_dim], rng,
                         activation=c.activation, out_scale=0.01)
        self.q1 = MLP([c.obs_dim + c.act_dim, *c.hidden, 1], rng,
                      activation=c.activation)
        self.q2 = MLP([c.obs_dim + c.act_dim, *c.hidden, 1], rng,
                      activation=c.activation)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self._beta = np.array([min(c.beta_init, c.beta_max)])
        self._log_alpha = np.array([math.log(c.alpha_init)])
        self._actor_opt = Adam(self.actor.parameters(), lr=c.lr_actor)
        self._beta_opt = Adam([self._beta], lr=c.lr_beta)
        self._q1_opt = Adam(self.q1.parameters(), lr=c.lr_critic)
        self._q2_opt = Adam(self.q2.parameters(), lr=c.lr_critic)
        self._alpha_opt = Adam([self._log_alpha], lr=c.lr_alpha)
        self.n_updates = 0

    # -- observation handling -------------------------------------------

    @property
    def beta(self) -> float:
        return float(self._beta[0])

    @property
    def alpha(self) -> float:
        return float(np.exp(self._log_alpha[0]))

    def transform_param(self) -> TransformParam:
        return TransformParam(beta=self.beta, eps=self.config.beta_eps)

    def transform(self, raw_obs: np.ndarray) -> np.ndarray:
        return transform_observation(raw_obs, self.config.n_beams,
                                     self.transform_param())

    # -- policy ----------------------------------------------------------

    def policy_forward(self, x: np.ndarray,
                       rng: np.random.Generator | None = None,
                       deterministic: bool = False) -> PolicyOutput:
        """Squashed-Gaussian policy on already-transformed states.

        x is (batch, obs_dim). Deterministic mode squashes the mean and
        is used for strict evaluation.
        """
        c = self.config
        if not self.actor.all_finite():
            raise NumericalError("actor parameters are not finite")
        out = self.actor.forward(np.atleast_2d(x))
        mu = out[:, : c.act_dim]
        log_std = np.clip(out[:, c.act_dim:], c.log_std_min, c.log_std_max)
        std = np.exp(log_std)
        if deterministic:
            u = mu
        else:
            u = mu + std * rng.standard_normal(mu.shape)
        t = np.tanh(u)
        action = map_to_box(t)
        log_prob = self._log_prob_parts(u, mu, log_std, t)
        return PolicyOutput(mean=mu, log_std=log_std, pre_squash=u,
                            action=action, log_prob=log_prob)

    def _log_prob_parts(self, u, mu, log_std, t) -> np.ndarray:
        c = self.config
        std = np.exp(log_std)
        z = (u - mu) / std
        gauss = -0.5 * z * z - log_std - 0.5 * math.log(2.0 * math.pi)
        squash = -np.log(1.0 - t * t + c.squash_eps)
        affine = -np.log(ACTION_SCALE)
        return (gauss + squash + affine).sum(axis=1)

    def act(self, raw_obs: np.ndarray, rng: np.random.Generator | None = None,
            deterministic: bool = False) -> Action:
        x = self.transform(np.asarray(raw_obs, dtype=float))
        po = self.policy_forward(x, rng=rng, deterministic=deterministic)
        a = np.clip(po.action[0], ACTION_LOW, ACTION_HIGH)
        return Action(v=float(a[0]), w=float(a[1]))

    # -- targets ---------------------------------------------------------

    def critic_target(self, reward: np.ndarray, done: np.ndarray,
                      next_obs_raw: np.ndarray,
                      rng: np.random.Generator) -> np.ndarray:
        """y = r + gamma * (1 - d) * (min target Q - alpha * log pi).

        Terminal rows reduce to the immediate reward and never touch the
        next state, so garbage s' cannot leak into a d=1 target.
        """
        reward = np.asarray(reward, dtype=float)
        done = np.asarray(done, dtype=float)
        with np.errstate(all="ignore"):
            x2 = self.transform(np.atleast_2d(next_obs_raw))
            po = self.policy_forward(x2, rng=rng)
            q_in = np.concatenate([x2, po.action], axis=1)
            qt = np.minimum(self.q1_target.forward(q_in),
                            self.q2_target.forward(q_in))[:, 0]
            soft = qt - self.alpha * po.log_prob
            y = np.where(done > 0.5, reward, reward + self.config.gamma * soft)
        return y

    # -- one gradient step -----------------------------------------------

    def actor_beta_grads(self, obs_raw: np.ndarray, eps_n: np.ndarray):
        """Loss and gradients of mean(alpha*logpi - min Q) at a fixed
        reparameterization noise, w.r.t. actor parameters and beta.

        The beta gradient flows through every use of the transformed
        observation in this loss: the actor input and the critic input.
        Returns (loss, grad_weights, grad_biases, grad_beta, log_prob).
        """
        c = self.config
        n = obs_raw.shape[0]
        x = self.transform(obs_raw)
        out, acache = self.actor.forward(x, want_cache=True)
        mu = out[:, : c.act_dim]
        ls_raw = out[:, c.act_dim:]
        ls = np.clip(ls_raw, c.log_std_min, c.log_std_max)
        std = np.exp(ls)
        u = mu + std * eps_n
        t = np.tanh(u)
        s2t = 1.0 - t * t
        action_new = map_to_box(t)
        log_prob = (-0.5 * eps_n * eps_n - ls
                    - 0.5 * math.log(2.0 * math.pi)
                    - np.log(s2t + c.squash_eps)
                    - np.log(ACTION_SCALE)).sum(axis=1)

        q_in_new = np.concatenate([x, action_new], axis=1)
        q1v, cache1 = self.q1.forward(q_in_new, want_cache=True)
        q2v, cache2 = self.q2.forward(q_in_new, want_cache=True)
        q_min = np.minimum(q1v, q2v)[:, 0]
        alpha = self.alpha
        loss = float(np.mean(alpha * log_prob - q_min))

        take1 = (q1v <= q2v).astype(float)
        gin1 = self.q1.backward_input(cache1, -take1 / n)
        gin2 = self.q2.backward_input(cache2, -(1.0 - take1) / n)
        g_qin = gin1 + gin2
        g_x = g_qin[:, : c.obs_dim].copy()
        g_act = g_qin[:, c.obs_dim:]

        # d/du of -log(1 - tanh(u)^2 + eps)
        corr = 2.0 * t * s2t / (s2t + c.squash_eps)
        g_u = g_act * ACTION_SCALE * s2t + (alpha / n) * corr
        g_mu = g_u
        g_ls = g_u * (std * eps_n) - (alpha / n)
        g_ls = g_ls * ((ls_raw > c.log_std_min) & (ls_raw < c.log_std_max))
        gw_a, gb_a, g_x_actor = self.actor.backward(
            acache, np.concatenate([g_mu, g_ls], axis=1))
        g_x += g_x_actor

        # transform offset: d l_hat / d beta = l_hat^2 where not clamped
        m = c.n_beams
        not_clamped = (obs_raw[:, :m] - self.beta) > c.beta_eps
        g_beta = float(np.sum(g_x[:, :m] * (x[:, :m] ** 2) * not_clamped))
        return loss, gw_a, gb_a, g_beta, log_prob

    def update(self, batch, rng: np.random.Generator) -> dict:
        """One SAC step: critics, actor (+ transform offset), temperature,
        then soft target updates. Returns the loss scalars."""
        c = self.config
        n = len(batch)
        x = self.transform(batch.obs)
        y = self.critic_target(batch.reward, batch.done, batch.next_obs, rng)

        # critic regression toward the frozen target
        q_in = np.concatenate([x, batch.action], axis=1)
        critic_losses = []
        for net, opt in ((self.q1, self._q1_opt), (self.q2, self._q2_opt)):
            q, cache = net.forward(q_in, want_cache=True)
            err = q[:, 0] - y
            critic_losses.append(float(np.mean(err * err)))
            gw, gb, _ = net.backward(cache, (2.0 / n) * err[:, None])
            opt.step(gw + gb)

        # actor + beta via a fresh reparameterized sample
        eps_n = rng.standard_normal((n, c.act_dim))
        actor_loss, gw_a, gb_a, g_beta, log_prob = \
            self.actor_beta_grads(batch.obs, eps_n)
        self._actor_opt.step(gw_a + gb_a)
        self._beta_opt.step([np.array([g_beta])])
        self._beta[0] = min(self._beta[0], c.beta_max)

        # temperature tracks the entropy target
        alpha_loss = 0.0
        if c.auto_alpha:
            ent_gap = float(np.mean(log_prob + c.target_entropy))
            alpha_loss = -float(self._log_alpha[0]) * ent_gap
            self._alpha_opt.step([np.array([-ent_gap])])

        polyak_update(self.q1_target, self.q1, c.rho)
        polyak_update(self.q2_target, self.q2, c.rho)
        self.n_updates += 1

        losses = {
            "critic1": critic_losses[0],
            "critic2": critic_losses[1],
            "actor": actor_loss,
            "temperature": alpha_loss,
            "alpha": self.alpha,
            "beta": self.beta,
        }
        bad = [k for k, v in losses.items() if not math.isfinite(v)]
        if bad:
            raise NumericalError(
                f"non-finite loss {bad} at update {self.n_updates}; "
                f"param summary: {self.param_summary()}")
        if self.n_updates % 100 == 0:
            self.assert_finite()
        return losses

    # -- diagnostics -----------------------------------------------------

    def param_summary(self) -> dict:
        def norm(net):
            return float(max(np.abs(p).max() for p in net.parameters()))
        return {"actor_max": norm(self.actor), "q1_max": norm(self.q1),
                "q2_max": norm(self.q2), "beta": self.beta,
                "alpha": self.alpha}

    def assert_finite(self) -> None:
        for name, net in (("actor", self.actor), ("q1", self.q1),
                          ("q2", self.q2), ("q1_target", self.q1_target),
                          ("q2_target", self.q2_target)):
            if not net.all_finite():
                raise NumericalError(f"{name} has non-finite parameters "
                                     f"after update {self.n_updates}")

    # -- checkpointing ---------------------------------------------------

    def save_checkpoint(self, path, step: int = 0) -> None:
        """Write parameters, transform offset, temperature and the step
        counter. Optimizer moments are not part of the format."""
        arrays = {"beta": self._beta, "log_alpha": self._log_alpha,
                  "step": np.array([step]),
                  "version": np.array([CHECKPOINT_VERSION])}
        for name, net in (("actor", self.actor), ("q1", self.q1),
                          ("q2", self.q2), ("q1t", self.q1_target),
                          ("q2t", self.q2_target)):
            for i, w in enumerate(net.weights):
                arrays[f"{name}_w{i}"] = w
            for i, b in enumerate(net.biases):
                arrays[f"{name}_b{i}"] = b
        cfg = dict(asdict(self.config))
        cfg["hidden"] = list(cfg["hidden"])
        arrays["config_json"] = np.frombuffer(
            json.dumps(cfg, sort_keys=True).encode(), dtype=np.uint8)
        np.savez(path, **arrays)

    @classmethod
    def load_checkpoint(cls, path) -> tuple["SACLearner", int]:
        """Rebuild a learner from a checkpoint; returns (learner, step)."""
        try:
            with np.load(path) as data:
                arrays = {k: data[k] for k in data.files}
        except (OSError, ValueError, zipfile.BadZipFile, KeyError,
                EOFError, io.UnsupportedOperation) as exc:
            raise CheckpointError(f"cannot read checkpoint {path}: {exc}") \
                from exc
        version = int(arrays.get("version", [0])[0])
        if version != CHECKPOINT_VERSION:
            raise CheckpointError(f"checkpoint version {version} not "
                                  f"supported (want {CHECKPOINT_VERSION})")
        try:
            cfg_raw = json.loads(bytes(arrays["config_json"]).decode())
            config = LearnerConfig(**cfg_raw)
            learner = cls(config, np.random.default_rng(0))
            for name, net in (("actor", learner.actor), ("q1", learner.q1),
                              ("q2", learner.q2), ("q1t", learner.q1_target),
                              ("q2t", learner.q2_target)):
                for i in range(net.n_layers):
                    w = arrays[f"{name}_w{i}"]
                    b = arrays[f"{name}_b{i}"]
                    if w.shape != net.weights[i].shape:
                        raise CheckpointError(
                            f"{name} layer {i} shape {w.shape} does not "
                            f"match config {net.weights[i].shape}")
                    net.weights[i] = w.copy()
                    net.biases[i] = b.copy()
            learner._beta[0] = float(arrays["beta"][0])
            learner._log_alpha[0] = float(arrays["log_alpha"][0])
            step = int(arrays["step"][0])
        except KeyError as exc:
            raise CheckpointError(f"checkpoint {path} is missing {exc}") \
                from exc
        # optimizer param lists must track the reloaded arrays
        learner._actor_opt = Adam(learner.actor.parameters(),
                                  lr=config.lr_actor)
        learner._beta_opt = Adam([learner._beta], lr=config.lr_beta)
        learner._q1_opt = Adam(learner.q1.parameters(), lr=config.lr_critic)
        learner._q2_opt = Adam(learner.q2.parameters(), lr=config.lr_critic)
        learner._alpha_opt = Adam([learner._log_alpha], lr=config.lr_alpha)
        return learner, step
