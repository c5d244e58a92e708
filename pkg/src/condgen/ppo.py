"""Clipped-surrogate policy optimization on collected rollout segments.

The loss lives in `ppo_loss` as a plain differentiable function of the
network and flat tensors, so tests can run it under float64 and compare
its gradients against finite differences; `ppo_update` adds the epoch and
minibatch machinery around it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
from torch import nn

from condgen.policy import DivergenceError


@dataclass
class Transition:
    observation: np.ndarray  # stacked (C, H, W) float32
    action: int
    log_prob: float
    reward: float
    value: float
    done: bool


@dataclass
class Trajectory:
    """One fixed-length rollout segment from a single environment.

    Episode boundaries inside the segment are carried by the transitions'
    done flags; bootstrap_value estimates the value of the state following
    the last transition (ignored when that transition ended an episode).
    """

    transitions: list[Transition]
    bootstrap_value: float


def gae(
    rewards: np.ndarray,
    values: np.ndarray,
    dones: np.ndarray,
    bootstrap_value,
    gamma: float,
    lam: float,
) -> tuple[np.ndarray, np.ndarray]:
    """Generalized advantage estimates and value targets.

    Accepts (T,) vectors or (T, N) stacked segments; dones mask both the
    bootstrap and the advantage recursion at episode ends.
    """
    if not (0 <= gamma <= 1 and 0 <= lam <= 1):
        raise ValueError("gamma and lam must lie in [0, 1]")
    rewards = np.asarray(rewards, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    dones = np.asarray(dones, dtype=np.float64)
    advantages = np.zeros_like(rewards)
    next_value = np.asarray(bootstrap_value, dtype=np.float64)
    next_advantage = np.zeros_like(next_value)
    for t in range(len(rewards) - 1, -1, -1):
        live = 1.0 - dones[t]
        delta = rewards[t] + gamma * next_value * live - values[t]
        next_advantage = delta + gamma * lam * live * next_advantage
        advantages[t] = next_advantage
        next_value = values[t]
    return advantages, advantages + values


def trajectory_batch(
    trajectories: list[Trajectory], gamma: float, lam: float
) -> dict[str, np.ndarray]:
    """Flatten segments into one training batch with advantages attached."""
    if not trajectories:
        raise ValueError("empty trajectory batch")
    pieces: dict[str, list[np.ndarray]] = {
        "observations": [],
        "actions": [],
        "log_probs": [],
        "advantages": [],
        "returns": [],
    }
    for traj in trajectories:
        ts = traj.transitions
        rewards = np.array([t.reward for t in ts])
        values = np.array([t.value for t in ts])
        dones = np.array([t.done for t in ts], dtype=np.float64)
        adv, ret = gae(rewards, values, dones, traj.bootstrap_value, gamma, lam)
        pieces["observations"].append(np.stack([t.observation for t in ts]))
        pieces["actions"].append(np.array([t.action for t in ts], dtype=np.int64))
        pieces["log_probs"].append(np.array([t.log_prob for t in ts]))
        pieces["advantages"].append(adv)
        pieces["returns"].append(ret)
    return {key: np.concatenate(parts) for key, parts in pieces.items()}


def ppo_loss(
    net: nn.Module,
    observations: torch.Tensor,
    actions: torch.Tensor,
    old_log_probs: torch.Tensor,
    advantages: torch.Tensor,
    returns: torch.Tensor,
    clip_eps: float = 0.2,
    vf_coef: float = 0.5,
    ent_coef: float = 0.01,
) -> tuple[torch.Tensor, dict[str, float]]:
    """Total loss = clipped policy surrogate + value MSE - entropy bonus."""
    logits, values = net(observations)
    log_probs = torch.log_softmax(logits, dim=-1)
    new_log_probs = log_probs.gather(1, actions.view(-1, 1)).squeeze(1)
    ratio = torch.exp(new_log_probs - old_log_probs)
    unclipped = ratio * advantages
    clipped = torch.clamp(ratio, 1.0 - clip_eps, 1.0 + clip_eps) * advantages
    policy_loss = -torch.minimum(unclipped, clipped).mean()
    value_loss = ((values - returns) ** 2).mean()
    entropy = -(log_probs.exp() * log_probs).sum(dim=-1).mean()
    total = policy_loss + vf_coef * value_loss - ent_coef * entropy
    with torch.no_grad():
        approx_kl = (old_log_probs - new_log_probs).mean()
        if math.isinf(clip_eps):
            clip_fraction = torch.zeros(())
        else:
            clip_fraction = ((ratio - 1.0).abs() > clip_eps).float().mean()
    stats = {
        "policy_loss": float(policy_loss.detach()),
        "value_loss": float(value_loss.detach()),
        "entropy": float(entropy.detach()),
        "approx_kl": float(approx_kl),
        "clip_fraction": float(clip_fraction),
    }
    return total, stats


def ppo_update(
    net: nn.Module,
    optimizer: torch.optim.Optimizer,
    batch: dict[str, np.ndarray],
    rng: np.random.Generator,
    clip_eps: float = 0.2,
    epochs: int = 4,
    minibatches: int = 4,
    vf_coef: float = 0.5,
    ent_coef: float = 0.01,
    max_grad_norm: float = 0.5,
) -> dict[str, float]:
    """Run the epoch/minibatch gradient loop over one collected batch.

    Advantages are normalized once over the whole batch.  A non-finite
    loss aborts before any parameter is touched by that step.
    """
    size = len(batch["actions"])
    if size == 0:
        raise ValueError("empty batch")
    if size % minibatches != 0:
        raise ValueError(f"batch size {size} not divisible into {minibatches} minibatches")

    dtype = next(net.parameters()).dtype
    advantages = np.asarray(batch["advantages"], dtype=np.float64)
    advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)

    tensors = {
        "observations": torch.as_tensor(batch["observations"]).to(dtype),
        "actions": torch.as_tensor(batch["actions"], dtype=torch.int64),
        "log_probs": torch.as_tensor(batch["log_probs"]).to(dtype),
        "advantages": torch.as_tensor(advantages).to(dtype),
        "returns": torch.as_tensor(batch["returns"]).to(dtype),
    }

    totals: dict[str, float] = {}
    steps = 0
    per_minibatch = size // minibatches
    for _ in range(epochs):
        order = rng.permutation(size)
        for m in range(minibatches):
            idx = torch.as_tensor(order[m * per_minibatch : (m + 1) * per_minibatch])
            loss, stats = ppo_loss(
                net,
                tensors["observations"][idx],
                tensors["actions"][idx],
                tensors["log_probs"][idx],
                tensors["advantages"][idx],
                tensors["returns"][idx],
                clip_eps=clip_eps,
                vf_coef=vf_coef,
                ent_coef=ent_coef,
            )
            if not torch.isfinite(loss):
                raise DivergenceError("non-finite optimization loss")
            optimizer.zero_grad()
            loss.backward()
            if max_grad_norm is not None:
                nn.utils.clip_grad_norm_(net.parameters(), max_grad_norm)
            optimizer.step()
            steps += 1
            for key, value in stats.items():
                totals[key] = totals.get(key, 0.0) + value
    return {key: value / steps for key, value in totals.items()}
