"""Action-selection strategies sharing one small interface.

Every agent exposes ``act(env, state, obs, rng) -> int``.  The greedy agent
is a one-step-lookahead oracle over the exact loss; it needs no training
and doubles as the reference behavior for control tests and the live
steering service.
"""

from __future__ import annotations

import numpy as np

from condgen.env import CondGenEnv, EpisodeState, Observation, compute_loss
from condgen.grids import apply_edit
from condgen.metrics import metric_vector
from condgen.policy import PolicyNet, act


def greedy_act(state: EpisodeState) -> int:
    """Loss-minimizing action at the current cell.

    Tries every tile plus the no-op; ties break toward the no-op first,
    then the lowest tile index.
    """
    best_action = 0
    best_loss = state.prev_loss
    current = int(state.grid.cells[state.current_cell])
    for tile in range(state.domain.n_tiles):
        if tile == current:
            continue  # same outcome as the no-op, which wins the tie anyway
        candidate, _ = apply_edit(state.grid, state.current_cell, tile)
        loss = compute_loss(metric_vector(state.domain, candidate), state.goal, state.control)
        if loss < best_loss:
            best_loss = loss
            best_action = tile + 1
    return best_action


class GreedyAgent:
    label = "greedy"

    def act(
        self,
        env: CondGenEnv,
        state: EpisodeState,
        obs: Observation,
        rng: np.random.Generator | None = None,
    ) -> int:
        return greedy_act(state)


class RandomAgent:
    """Uniform over the full action set; the untrained baseline."""

    label = "random"

    def act(
        self,
        env: CondGenEnv,
        state: EpisodeState,
        obs: Observation,
        rng: np.random.Generator | None = None,
    ) -> int:
        if rng is None:
            rng = np.random.default_rng()
        return int(rng.integers(0, env.n_actions))


class PolicyAgent:
    """Wraps a trained network; argmax mode by default for reproducible runs."""

    def __init__(self, net: PolicyNet, mode: str = "argmax") -> None:
        self.net = net
        self.mode = mode
        self.label = f"policy-{mode}"

    def act(
        self,
        env: CondGenEnv,
        state: EpisodeState,
        obs: Observation,
        rng: np.random.Generator | None = None,
    ) -> int:
        action, _, _ = act(self.net, obs.stacked(), self.mode, rng)
        return action
