"""The controllable editing environment.

An episode starts from a uniformly random grid and a goal vector over the
controlled metrics.  The agent visits cells in a seeded random order and at
each step either leaves the current cell alone (action 0) or writes one tile
(action k writes alphabet[k-1]).  The observation pairs a one-hot crop of
the grid, centered on the current cell, with one constant plane per
controlled metric holding sign(goal - current value).

Loss is a weighted L1 distance between the metric vector and the goal
(fixed-goal metrics are folded into the same sum); the step reward is the
loss decrease.  Loss arithmetic uses exact rationals so that rewards
telescope bit-exactly: the sum of rewards over any episode equals initial
loss minus final loss.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from condgen.grids import DomainSpec, TileGrid, apply_edit, crop_view, random_map
from condgen.metrics import UNDEFINED, metric_vector

RUNNING = "running"
TARGET_REACHED = "target_reached"
CHANGE_LIMIT = "change_limit"
STEP_LIMIT = "step_limit"


class GoalBoundsError(ValueError):
    """Raised when a goal vector has the wrong arity or leaves its bounds."""


class EpisodeDoneError(RuntimeError):
    """Raised when stepping or re-targeting an already-terminated episode."""


@dataclass(frozen=True)
class ControlSpec:
    """Which metrics the goal vector controls, and what the rest are pinned to.

    ``bounds`` give the inclusive integer goal range per controlled metric
    and default to the domain's metric bounds.  ``weights`` are per-metric
    loss weights (default 1, exact rationals).  A metric reading the -1
    sentinel contributes weight times the span of its domain bounds to the
    loss, standing in for a maximally wrong value.
    """

    domain: DomainSpec
    controlled: tuple[str, ...]
    bounds: dict[str, tuple[int, int]] = field(default_factory=dict)
    fixed_goals: dict[str, int] = field(default_factory=dict)
    weights: dict[str, Fraction] = field(default_factory=dict)

    def __post_init__(self) -> None:
        names = self.domain.metric_names
        if not self.controlled:
            raise ValueError("at least one controlled metric required")
        if len(set(self.controlled)) != len(self.controlled):
            raise ValueError("duplicate controlled metric")
        overlap = set(self.controlled) & set(self.fixed_goals)
        if overlap:
            raise ValueError(f"metrics both controlled and fixed: {sorted(overlap)}")
        for name in (*self.controlled, *self.fixed_goals, *self.weights, *self.bounds):
            if name not in names:
                raise ValueError(f"unknown metric {name!r} for domain {self.domain.name}")

        bounds = dict(self.bounds)
        for name in self.controlled:
            lo, hi = bounds.get(name, self.domain.metric_bounds[name])
            dlo, dhi = self.domain.metric_bounds[name]
            if not (dlo <= lo <= hi <= dhi):
                raise ValueError(
                    f"bounds ({lo}, {hi}) for {name} outside domain bounds ({dlo}, {dhi})"
                )
            bounds[name] = (int(lo), int(hi))
        weights = {}
        for name in names:
            w = Fraction(self.weights.get(name, 1))
            if w < 0:
                raise ValueError(f"negative weight for {name}")
            weights[name] = w
        object.__setattr__(self, "bounds", bounds)
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "fixed_goals", {k: int(v) for k, v in self.fixed_goals.items()})

        index = {name: i for i, name in enumerate(names)}
        span = {
            name: Fraction(self.domain.metric_bounds[name][1] - self.domain.metric_bounds[name][0])
            for name in names
        }
        controlled_terms = tuple(
            (index[n], weights[n], span[n]) for n in self.controlled
        )
        fixed_terms = tuple(
            (index[n], int(t), weights[n], span[n]) for n, t in self.fixed_goals.items()
        )
        object.__setattr__(self, "_controlled_terms", controlled_terms)
        object.__setattr__(self, "_fixed_terms", fixed_terms)

    @property
    def n_controlled(self) -> int:
        return len(self.controlled)

    def bounds_array(self) -> np.ndarray:
        """(n_controlled, 2) inclusive integer goal bounds."""
        return np.array([self.bounds[n] for n in self.controlled], dtype=np.int64)

    def validate_goal(self, goal: np.ndarray) -> np.ndarray:
        goal = np.asarray(goal)
        if goal.shape != (self.n_controlled,):
            raise GoalBoundsError(
                f"goal has shape {goal.shape}, expected ({self.n_controlled},)"
            )
        if not np.issubdtype(goal.dtype, np.integer):
            rounded = np.rint(goal)
            if not np.all(rounded == goal):
                raise GoalBoundsError("goal values must be integers")
            goal = rounded
        goal = goal.astype(np.int64)
        for value, name in zip(goal, self.controlled):
            lo, hi = self.bounds[name]
            if not lo <= value <= hi:
                raise GoalBoundsError(
                    f"goal {name}={int(value)} outside bounds ({lo}, {hi})"
                )
        return goal

    def controlled_values(self, s: np.ndarray) -> np.ndarray:
        """Slice of the metric vector at the controlled positions."""
        return np.array([s[i] for i, _, _ in self._controlled_terms], dtype=np.int64)


def compute_loss(s: np.ndarray, goal: np.ndarray, spec: ControlSpec) -> Fraction:
    """Weighted L1 distance of the metric vector from the goal, exact.

    Controlled metrics measure against the goal vector, fixed metrics
    against their pinned targets; a -1 sentinel reading contributes the
    metric's full bound span instead of a distance.
    """
    total = Fraction(0)
    for (idx, weight, span), g in zip(spec._controlled_terms, goal):
        value = int(s[idx])
        term = span if value == UNDEFINED else Fraction(abs(int(g) - value))
        total += weight * term
    for idx, target, weight, span in spec._fixed_terms:
        value = int(s[idx])
        term = span if value == UNDEFINED else Fraction(abs(target - value))
        total += weight * term
    return total


@dataclass
class Observation:
    """One-hot map crop plus spatially constant condition planes."""

    map_view: np.ndarray  # (2H-1, 2W-1, n_tiles) float32
    condition: np.ndarray  # (n_controlled,) int8, each in {-1, 0, 1}

    def stacked(self) -> np.ndarray:
        """Channels-first (n_tiles + n_controlled, 2H-1, 2W-1) float32."""
        planes = np.moveaxis(self.map_view, -1, 0)
        h, w = planes.shape[1:]
        cond = np.broadcast_to(
            self.condition.astype(np.float32)[:, None, None], (len(self.condition), h, w)
        )
        return np.concatenate([planes, cond], axis=0).astype(np.float32, copy=False)


@dataclass
class EpisodeState:
    grid: TileGrid
    goal: np.ndarray
    s_t: np.ndarray
    s0: np.ndarray
    visit_order: np.ndarray
    cursor: int
    steps: int
    changes: int
    prev_loss: Fraction
    done: bool
    done_reason: str
    rng: np.random.Generator
    change_limit: int
    step_limit: int
    domain: DomainSpec = None  # type: ignore[assignment]
    control: ControlSpec = None  # type: ignore[assignment]

    @property
    def current_cell(self) -> tuple[int, int]:
        flat = int(self.visit_order[self.cursor])
        return flat // self.grid.width, flat % self.grid.width


@dataclass
class StepResult:
    observation: Observation
    reward: Fraction
    done: bool
    info: dict


class CondGenEnv:
    """Narrow-representation editing environment over one domain.

    change_ratio scales the changed-cell budget (limit = ceil(ratio * W * H));
    the step limit is always (W * H) squared.  raster_order replaces the
    random visit permutation with row-major order, for debugging.
    """

    def __init__(
        self,
        domain: DomainSpec,
        control: ControlSpec,
        change_ratio: float = 1.0,
        raster_order: bool = False,
    ) -> None:
        if control.domain is not domain and control.domain != domain:
            raise ValueError("control spec built for a different domain")
        if not 0 < change_ratio <= 1:
            raise ValueError("change_ratio must be in (0, 1]")
        self.domain = domain
        self.control = control
        self.change_ratio = change_ratio
        self.raster_order = raster_order
        h, w = domain.default_size
        self.n_cells = h * w
        self.change_limit = math.ceil(change_ratio * self.n_cells)
        self.step_limit = self.n_cells * self.n_cells

    @property
    def n_actions(self) -> int:
        """No-op plus one write action per tile."""
        return self.domain.n_tiles + 1

    @property
    def obs_channels(self) -> int:
        return self.domain.n_tiles + self.control.n_controlled

    def _permutation(self, rng: np.random.Generator) -> np.ndarray:
        if self.raster_order:
            return np.arange(self.n_cells)
        return rng.permutation(self.n_cells)

    def _observe(self, state: EpisodeState) -> Observation:
        view = crop_view(state.grid, state.current_cell, self.domain)
        controlled = self.control.controlled_values(state.s_t)
        condition = np.sign(state.goal - controlled).astype(np.int8)
        return Observation(view, condition)

    def reset(
        self, goal: np.ndarray, seed: int | np.random.Generator | None = None
    ) -> tuple[EpisodeState, Observation]:
        """Fresh random grid and visit order; termination is never checked here."""
        goal = self.control.validate_goal(goal)
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        grid = random_map(self.domain, rng)
        s0 = metric_vector(self.domain, grid)
        state = EpisodeState(
            grid=grid,
            goal=goal,
            s_t=s0,
            s0=s0.copy(),
            visit_order=self._permutation(rng),
            cursor=0,
            steps=0,
            changes=0,
            prev_loss=compute_loss(s0, goal, self.control),
            done=False,
            done_reason=RUNNING,
            rng=rng,
            change_limit=self.change_limit,
            step_limit=self.step_limit,
            domain=self.domain,
            control=self.control,
        )
        return state, self._observe(state)

    def step(self, state: EpisodeState, action: int) -> StepResult:
        """Apply one action at the current cell and advance the cursor."""
        if state.done:
            raise EpisodeDoneError("episode already terminated")
        action = int(action)
        if not 0 <= action <= self.domain.n_tiles:
            raise ValueError(
                f"action {action} outside [0, {self.domain.n_tiles}]"
            )

        if action > 0:
            grid, changed = apply_edit(
                state.grid, state.current_cell, action - 1, self.domain.n_tiles
            )
            if changed:
                state.grid = grid
                state.changes += 1
                state.s_t = metric_vector(self.domain, grid)

        loss = compute_loss(state.s_t, state.goal, self.control)
        reward = state.prev_loss - loss
        state.prev_loss = loss
        state.steps += 1

        state.cursor += 1
        if state.cursor >= len(state.visit_order):
            state.visit_order = self._permutation(state.rng)
            state.cursor = 0

        if loss == 0:
            state.done, state.done_reason = True, TARGET_REACHED
        elif state.changes >= state.change_limit:
            state.done, state.done_reason = True, CHANGE_LIMIT
        elif state.steps >= state.step_limit:
            state.done, state.done_reason = True, STEP_LIMIT

        info = {
            "s_t": state.s_t.copy(),
            "loss": loss,
            "changes": state.changes,
            "steps": state.steps,
            "done_reason": state.done_reason,
        }
        return StepResult(self._observe(state), reward, state.done, info)

    def set_goal(self, state: EpisodeState, new_goal: np.ndarray) -> EpisodeState:
        """Swap the goal mid-episode without granting reward for the swap."""
        if state.done:
            raise EpisodeDoneError("cannot re-target a terminated episode")
        goal = self.control.validate_goal(new_goal)
        state.goal = goal
        state.prev_loss = compute_loss(state.s_t, goal, self.control)
        return state
