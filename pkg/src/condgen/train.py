"""Seeded rollout/update training loop.

Rollouts are collected in-process from a set of logically parallel
environments stepped in lockstep, which keeps runs bit-reproducible: one
batched network forward serves all environments each timestep, and every
random draw comes from a seeded generator with a fixed consumption order.

Artifacts land in the output directory: ``checkpoint.bin`` (rewritten
periodically; the previous good file survives a diverged run) and
``metrics.ndjson`` (append-only, one JSON record per update).
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from condgen.checkpoint import (
    Checkpoint,
    load_optimizer_arrays,
    load_policy_arrays,
    optimizer_arrays,
    policy_arrays,
    restore_torch_rng,
    save_checkpoint,
    torch_rng_array,
    verify_config_hash,
)
from condgen.config import ConfigError, RunConfig, config_hash
from condgen.curriculum import make_teacher
from condgen.env import CondGenEnv
from condgen.evaluate import episode_outcome
from condgen.policy import PolicyNet, act_batch
from condgen.ppo import Trajectory, Transition, ppo_update, trajectory_batch


@dataclass
class UpdateRecord:
    update: int
    frames: int
    episodes: int
    mean_return: float | None
    mean_outcome: float | None
    stats: dict[str, float]


def build_policy(config: RunConfig, env: CondGenEnv, seed: int) -> PolicyNet:
    torch.manual_seed(seed)
    h, w = env.domain.default_size
    return PolicyNet(env.obs_channels, env.n_actions, (2 * h - 1, 2 * w - 1))


def make_optimizer(net: PolicyNet, config: RunConfig) -> torch.optim.Optimizer:
    return torch.optim.Adam(net.parameters(), lr=config.training.learning_rate, eps=1e-5)


def train(
    config: RunConfig,
    out_dir,
    resume: Checkpoint | None = None,
    force: bool = False,
    log=print,
) -> Path:
    """Run the configured number of frames; returns the checkpoint path."""
    tc = config.training
    batch_size = tc.workers * tc.segment_length
    if batch_size % tc.minibatches != 0:
        raise ConfigError(
            f"workers*segment_length = {batch_size} not divisible by "
            f"{tc.minibatches} minibatches"
        )
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    ckpt_path = out_dir / "checkpoint.bin"
    log_path = out_dir / "metrics.ndjson"

    domain = config.build_domain()
    control = config.build_control(domain)
    env = CondGenEnv(domain, control, change_ratio=config.env.change_ratio,
                     raster_order=config.env.raster_order)
    cfg_hash = config_hash(config)

    seeds = np.random.SeedSequence(tc.seed)
    torch_seed, teacher_seed, action_seed, update_seed, *worker_seeds = [
        int(s.generate_state(1)[0]) for s in seeds.spawn(4 + tc.workers)
    ]
    net = build_policy(config, env, torch_seed)
    optimizer = make_optimizer(net, config)
    teacher = make_teacher(
        config.teacher.mode,
        control.bounds_array(),
        seed=teacher_seed,
        **(
            {}
            if config.teacher.mode == "uniform"
            else {
                "fit_window": config.teacher.fit_window,
                "refit_every": config.teacher.refit_every,
                "warmup": config.teacher.warmup,
                "k_range": config.teacher.k_range,
                "explore_ratio": config.teacher.explore_ratio,
            }
        ),
    )
    action_rng = np.random.default_rng(action_seed)
    update_rng = np.random.default_rng(update_seed)
    worker_rngs = [np.random.default_rng(s) for s in worker_seeds]

    frames = 0
    updates = 0
    episodes = 0
    if resume is not None:
        verify_config_hash(resume, cfg_hash, force)
        load_policy_arrays(net, resume.arrays)
        load_optimizer_arrays(optimizer, resume.arrays, resume.optimizer)
        teacher.load_state(resume.teacher, resume.arrays)
        frames = resume.frames
        updates = resume.updates
        episodes = resume.episodes
        if resume.numpy_rng is not None:
            action_rng.bit_generator.state = resume.numpy_rng
        for rng, state in zip(worker_rngs, resume.extra.get("worker_rngs", [])):
            rng.bit_generator.state = state
        if "update_rng" in resume.extra:
            update_rng.bit_generator.state = resume.extra["update_rng"]
        if "torch_rng" in resume.arrays:
            restore_torch_rng(resume.arrays["torch_rng"])

    # Fresh episodes for every worker (in-flight episodes are not persisted).
    states = []
    observations = []
    for i in range(tc.workers):
        state, obs = env.reset(teacher.propose_goal(), worker_rngs[i])
        states.append(state)
        observations.append(obs)

    def write_checkpoint() -> None:
        arrays = {
            **policy_arrays(net),
            **teacher.state_arrays(),
            "torch_rng": torch_rng_array(),
        }
        opt_arrays, opt_meta = optimizer_arrays(optimizer)
        arrays.update(opt_arrays)
        ckpt = Checkpoint(
            config_hash=cfg_hash,
            frames=frames,
            updates=updates,
            episodes=episodes,
            arrays=arrays,
            optimizer=opt_meta,
            teacher=teacher.state_meta(),
            numpy_rng=action_rng.bit_generator.state,
            extra={
                "worker_rngs": [r.bit_generator.state for r in worker_rngs],
                "update_rng": update_rng.bit_generator.state,
            },
        )
        tmp = ckpt_path.with_suffix(".tmp")
        save_checkpoint(tmp, ckpt)
        os.replace(tmp, ckpt_path)

    returns_acc = [0.0] * tc.workers
    started = time.monotonic()
    with open(log_path, "a") as log_fh:
        while frames < tc.total_frames:
            segments = [
                Trajectory(transitions=[], bootstrap_value=0.0) for _ in range(tc.workers)
            ]
            window_returns: list[float] = []
            window_outcomes: list[float] = []
            for _ in range(tc.segment_length):
                stacked = np.stack([o.stacked() for o in observations])
                actions, log_probs, values = act_batch(net, stacked, "sample", action_rng)
                for i in range(tc.workers):
                    result = env.step(states[i], int(actions[i]))
                    reward = float(result.reward)
                    returns_acc[i] += reward
                    segments[i].transitions.append(
                        Transition(
                            observation=stacked[i],
                            action=int(actions[i]),
                            log_prob=float(log_probs[i]),
                            reward=reward,
                            value=float(values[i]),
                            done=result.done,
                        )
                    )
                    if result.done:
                        outcome = episode_outcome(
                            states[i].s0, states[i].s_t, states[i].goal, control
                        )
                        teacher.observe(states[i].goal, outcome)
                        episodes += 1
                        window_returns.append(returns_acc[i])
                        window_outcomes.append(outcome)
                        returns_acc[i] = 0.0
                        states[i], observations[i] = env.reset(
                            teacher.propose_goal(), worker_rngs[i]
                        )
                    else:
                        observations[i] = result.observation
            tail = np.stack([o.stacked() for o in observations])
            _, _, tail_values = act_batch(net, tail, "argmax")
            for i in range(tc.workers):
                segments[i].bootstrap_value = float(tail_values[i])

            batch = trajectory_batch(segments, tc.gamma, tc.lam)
            # A DivergenceError here propagates with the last good checkpoint
            # still on disk; nothing is written for the failed update.
            stats = ppo_update(
                net,
                optimizer,
                batch,
                update_rng,
                clip_eps=tc.clip_eps,
                epochs=tc.epochs,
                minibatches=tc.minibatches,
                vf_coef=tc.vf_coef,
                ent_coef=tc.ent_coef,
                max_grad_norm=tc.max_grad_norm,
            )
            frames += batch_size
            updates += 1

            record = {
                "update": updates,
                "frames": frames,
                "episodes": episodes,
                "mean_return": float(np.mean(window_returns)) if window_returns else None,
                "mean_outcome": float(np.mean(window_outcomes)) if window_outcomes else None,
                "teacher": {
                    "mode": teacher.mode,
                    "episodes": teacher.episodes,
                    "components": (
                        teacher.model.n_components
                        if getattr(teacher, "model", None) is not None
                        else None
                    ),
                },
                "elapsed_s": round(time.monotonic() - started, 3),
                **{k: round(v, 6) for k, v in stats.items()},
            }
            log_fh.write(json.dumps(record) + "\n")
            log_fh.flush()

            if updates % tc.checkpoint_every == 0:
                write_checkpoint()
            if log is not None and updates % 10 == 0:
                log(
                    f"update {updates}  frames {frames}/{tc.total_frames}  "
                    f"episodes {episodes}  "
                    f"outcome {record['mean_outcome'] if record['mean_outcome'] is not None else 'n/a'}"
                )

    write_checkpoint()
    return ckpt_path


def policy_from_checkpoint(config: RunConfig, ckpt: Checkpoint, force: bool = False) -> PolicyNet:
    """Rebuild the network a checkpoint was trained with and load its weights."""
    verify_config_hash(ckpt, config_hash(config), force)
    env = config.build_env()
    net = build_policy(config, env, seed=0)
    load_policy_arrays(net, ckpt.arrays)
    return net
