"""Post-hoc measurement: progress, diversity, and control sweeps.

A sweep lays a lattice of goal vectors over the controlled metric bounds
and runs a batch of inference episodes per lattice cell, reporting how far
the agent moved each metric toward its target (progress, clipped to
[0,100] after averaging) and how varied the finished levels are (mean
pairwise per-tile hamming distance in [0,1]).  Reports serialize to CSV
for quick plotting and JSON with sample levels included.
"""

from __future__ import annotations

import csv
import itertools
import json
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from condgen.env import CondGenEnv, ControlSpec
from condgen.grids import DomainSpec, TileGrid, render_level


def progress(initial: int, final: int, target: int) -> Fraction:
    """Percentage of the initial-to-target distance covered; exact, unclipped.

    When target equals initial there is nothing to cover: holding the value
    scores 100, moving off it scores 0.  Clipping to [0,100] happens after
    episode averaging, not here.
    """
    if target == initial:
        return Fraction(100 if final == initial else 0)
    return 100 * Fraction(final - initial, target - initial)


def clip_progress(value: Fraction) -> Fraction:
    return min(max(value, Fraction(0)), Fraction(100))


def episode_outcome(s0: np.ndarray, s_final: np.ndarray, goal: np.ndarray, control: ControlSpec) -> float:
    """Bounded [0,1] score for one episode: mean clipped per-metric progress."""
    initial = control.controlled_values(s0)
    final = control.controlled_values(s_final)
    per_metric = [
        clip_progress(progress(int(i), int(f), int(g)))
        for i, f, g in zip(initial, final, goal)
    ]
    return float(sum(per_metric) / len(per_metric) / 100)


def hamming_diversity(levels: list[TileGrid]) -> Fraction:
    """Mean over unordered pairs of the fraction of differing cells."""
    if len(levels) < 2:
        raise ValueError("diversity needs at least two levels")
    shape = levels[0].cells.shape
    for lv in levels[1:]:
        if lv.cells.shape != shape:
            raise ValueError("levels must share dimensions")
    cells = shape[0] * shape[1]
    total = Fraction(0)
    pairs = 0
    for a, b in itertools.combinations(levels, 2):
        total += Fraction(int((a.cells != b.cells).sum()), cells)
        pairs += 1
    return total / pairs


@dataclass
class CellResult:
    goal: dict[str, int]
    progress: float  # mean clipped progress in [0, 100]
    diversity: float | None  # None when fewer than 2 episodes ran
    episodes: int
    already_satisfied: bool  # every initial map met the goal outright
    samples: list[str] = field(default_factory=list)


@dataclass
class SweepReport:
    domain: str
    agent: str
    axes: dict[str, list[int]]
    cells: list[CellResult]
    episodes_per_cell: int
    step_cap: int
    seed: int

    def mean_progress(self) -> float:
        return float(np.mean([c.progress for c in self.cells]))


def lattice_axis(lo: int, hi: int, resolution: int) -> list[int]:
    """Evenly spaced integer targets across an inclusive range, deduplicated."""
    raw = np.linspace(lo, hi, resolution)
    values = sorted(set(int(round(v)) for v in raw))
    return values


def run_episode(
    env: CondGenEnv,
    agent,
    goal: np.ndarray,
    seed,
    step_cap: int,
) -> tuple[np.ndarray, np.ndarray, TileGrid, bool]:
    """One capped inference episode; returns (s0, final metrics, final grid, satisfied-at-start)."""
    rng = np.random.default_rng(seed)
    state, obs = env.reset(goal, rng)
    satisfied = state.prev_loss == 0
    action_rng = np.random.default_rng(rng.integers(0, 2**63))
    while not state.done and state.steps < step_cap:
        action = agent.act(env, state, obs, action_rng)
        result = env.step(state, action)
        obs = result.observation
    return state.s0, state.s_t, state.grid, satisfied


def sweep(
    agent,
    domain: DomainSpec,
    control: ControlSpec,
    resolution: int = 8,
    episodes_per_cell: int = 20,
    step_cap: int = 1000,
    seed: int = 0,
    change_ratio: float = 1.0,
    sample_levels: int = 3,
) -> SweepReport:
    """Evaluate the agent on the full goal lattice, deterministically.

    Per cell and controlled metric: raw progress is averaged over episodes
    and then clipped to [0,100]; multi-metric cells report the mean of the
    per-metric clipped values.  A cell whose every initial map already
    satisfies the goal reports 100 with the already_satisfied flag set.
    """
    env = CondGenEnv(domain, control, change_ratio=change_ratio)
    cap = min(step_cap, env.step_limit)
    axes = {
        name: lattice_axis(*control.bounds[name], resolution) for name in control.controlled
    }
    cells: list[CellResult] = []
    for cell_idx, targets in enumerate(itertools.product(*axes.values())):
        goal = np.array(targets, dtype=np.int64)
        per_metric: list[list[Fraction]] = [[] for _ in control.controlled]
        finals: list[TileGrid] = []
        satisfied_all = True
        for ep in range(episodes_per_cell):
            s0, s_final, grid, satisfied = run_episode(
                env, agent, goal, (seed, cell_idx, ep), cap
            )
            satisfied_all = satisfied_all and satisfied
            initial = control.controlled_values(s0)
            final = control.controlled_values(s_final)
            for i in range(len(goal)):
                per_metric[i].append(progress(int(initial[i]), int(final[i]), int(goal[i])))
            finals.append(grid)
        if episodes_per_cell == 0:
            continue
        if satisfied_all:
            cell_progress = 100.0
        else:
            clipped = [clip_progress(sum(vals) / len(vals)) for vals in per_metric]
            cell_progress = float(sum(clipped) / len(clipped))
        diversity = float(hamming_diversity(finals)) if len(finals) >= 2 else None
        cells.append(
            CellResult(
                goal={name: int(v) for name, v in zip(control.controlled, goal)},
                progress=cell_progress,
                diversity=diversity,
                episodes=episodes_per_cell,
                already_satisfied=satisfied_all,
                samples=[render_level(g, domain) for g in finals[:sample_levels]],
            )
        )
    return SweepReport(
        domain=domain.name,
        agent=getattr(agent, "label", agent.__class__.__name__),
        axes=axes,
        cells=cells,
        episodes_per_cell=episodes_per_cell,
        step_cap=cap,
        seed=seed,
    )


def write_csv(report: SweepReport, path) -> None:
    metric_names = list(report.axes)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [f"goal_{m}" for m in metric_names]
            + ["progress", "diversity", "episodes", "already_satisfied"]
        )
        for cell in report.cells:
            writer.writerow(
                [cell.goal[m] for m in metric_names]
                + [
                    f"{cell.progress:.6f}",
                    "" if cell.diversity is None else f"{cell.diversity:.6f}",
                    cell.episodes,
                    int(cell.already_satisfied),
                ]
            )


def write_json(report: SweepReport, path) -> None:
    doc = {
        "domain": report.domain,
        "agent": report.agent,
        "axes": report.axes,
        "episodes_per_cell": report.episodes_per_cell,
        "step_cap": report.step_cap,
        "seed": report.seed,
        "cells": [
            {
                "goal": cell.goal,
                "progress": cell.progress,
                "diversity": cell.diversity,
                "episodes": cell.episodes,
                "already_satisfied": cell.already_satisfied,
                "samples": cell.samples,
            }
            for cell in report.cells
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def summary_table(report: SweepReport) -> str:
    metric_names = list(report.axes)
    header = "  ".join(f"{m:>12}" for m in metric_names) + f"  {'progress':>9}  {'diversity':>9}"
    lines = [header]
    for cell in report.cells:
        goals = "  ".join(f"{cell.goal[m]:>12}" for m in metric_names)
        div = "-" if cell.diversity is None else f"{cell.diversity:.3f}"
        lines.append(f"{goals}  {cell.progress:>9.2f}  {div:>9}")
    lines.append(f"mean progress: {report.mean_progress():.2f}")
    return "\n".join(lines)
