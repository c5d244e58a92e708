"""Convolutional actor-critic network and action selection."""

from __future__ import annotations

import numpy as np
import torch
from torch import nn


class DivergenceError(RuntimeError):
    """Raised when the network or the optimizer produces non-finite values."""


def _orthogonal(layer: nn.Module, gain: float) -> nn.Module:
    nn.init.orthogonal_(layer.weight, gain=gain)
    nn.init.zeros_(layer.bias)
    return layer


class PolicyNet(nn.Module):
    """Three 3x3 conv layers (32-64-64), a 256-unit trunk, two heads.

    The policy head is initialized with a tiny gain so a fresh network acts
    near-uniformly over the action set.
    """

    def __init__(self, in_channels: int, n_actions: int, obs_hw: tuple[int, int]) -> None:
        super().__init__()
        h, w = obs_hw
        gain = float(np.sqrt(2.0))
        self.features = nn.Sequential(
            _orthogonal(nn.Conv2d(in_channels, 32, 3, padding=1), gain),
            nn.ReLU(),
            _orthogonal(nn.Conv2d(32, 64, 3, padding=1), gain),
            nn.ReLU(),
            _orthogonal(nn.Conv2d(64, 64, 3, padding=1), gain),
            nn.ReLU(),
            nn.Flatten(),
            _orthogonal(nn.Linear(64 * h * w, 256), gain),
            nn.ReLU(),
        )
        self.policy_head = _orthogonal(nn.Linear(256, n_actions), 0.01)
        self.value_head = _orthogonal(nn.Linear(256, 1), 1.0)
        self.in_channels = in_channels
        self.n_actions = n_actions
        self.obs_hw = (h, w)

    def forward(self, x: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        trunk = self.features(x)
        return self.policy_head(trunk), self.value_head(trunk).squeeze(-1)


def act(
    net: PolicyNet,
    obs: np.ndarray,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
) -> tuple[int, float, float]:
    """Pick one action for a single stacked observation.

    Returns (action, log-probability, value estimate).  Deterministic under
    argmax and under (sample, seeded rng); sampling uses the supplied numpy
    generator so no global torch RNG state is consumed.
    """
    batch = act_batch(net, obs[None], mode, rng)
    action, logp, value = batch
    return int(action[0]), float(logp[0]), float(value[0])


def act_batch(
    net: PolicyNet,
    obs: np.ndarray,
    mode: str = "sample",
    rng: np.random.Generator | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized act over a (B, C, H, W) observation batch."""
    if mode not in ("sample", "argmax"):
        raise ValueError(f"unknown action mode {mode!r}")
    with torch.no_grad():
        x = torch.as_tensor(np.asarray(obs, dtype=np.float32))
        logits, value = net(x)
    logits_np = logits.numpy()
    value_np = value.numpy()
    if not (np.all(np.isfinite(logits_np)) and np.all(np.isfinite(value_np))):
        raise DivergenceError("non-finite network output")
    log_probs = logits_np - _logsumexp(logits_np)
    if mode == "argmax":
        actions = np.argmax(logits_np, axis=-1)
    else:
        if rng is None:
            rng = np.random.default_rng()
        probs = np.exp(log_probs)
        probs /= probs.sum(axis=-1, keepdims=True)
        cumulative = np.cumsum(probs, axis=-1)
        draws = rng.random(len(probs))
        actions = (cumulative < draws[:, None]).sum(axis=-1)
        actions = np.minimum(actions, probs.shape[-1] - 1)
    chosen = log_probs[np.arange(len(actions)), actions]
    return actions.astype(np.int64), chosen, value_np


def _logsumexp(logits: np.ndarray) -> np.ndarray:
    peak = logits.max(axis=-1, keepdims=True)
    return peak + np.log(np.exp(logits - peak).sum(axis=-1, keepdims=True))
