"""Command-line entry points.

    condgen train    --config cfg.yaml [--checkpoint ckpt] [--out DIR] [--seed N]
    condgen evaluate --config cfg.yaml (--checkpoint ckpt | --greedy) [--out DIR]
    condgen generate --config cfg.yaml (--checkpoint ckpt | --greedy) --goal m=v[,m=v] ...
    condgen analyze  --config cfg.yaml LEVEL_FILE...
    condgen serve    --config cfg.yaml [--checkpoint ckpt | --greedy]

Exit codes: 0 success, 2 validation error, 3 training divergence.
The CONDGEN_LOG environment variable sets the logging level.
"""

from __future__ import annotations

import dataclasses
import json
import logging
import os
import sys
from pathlib import Path

import click
import numpy as np

from condgen.agents import GreedyAgent, PolicyAgent
from condgen.checkpoint import CheckpointError, load_checkpoint
from condgen.config import ConfigError, RunConfig, load_config
from condgen.env import GoalBoundsError
from condgen.evaluate import run_episode, summary_table, sweep, write_csv, write_json
from condgen.grids import LevelFormatError, parse_level, render_level
from condgen.metrics import metric_vector, metrics_as_dict
from condgen.policy import DivergenceError

log = logging.getLogger("condgen")


def _apply_seed(config: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return config
    return dataclasses.replace(
        config,
        training=dataclasses.replace(config.training, seed=seed),
        eval=dataclasses.replace(config.eval, seed=seed),
    )


def _build_agent(config: RunConfig, checkpoint_path: str | None, greedy: bool, force: bool):
    if greedy and checkpoint_path:
        raise ConfigError("--greedy and --checkpoint are mutually exclusive")
    if greedy:
        return GreedyAgent()
    if checkpoint_path:
        from condgen.train import policy_from_checkpoint

        ckpt = load_checkpoint(checkpoint_path)
        return PolicyAgent(policy_from_checkpoint(config, ckpt, force))
    raise ConfigError("an agent is required: pass --checkpoint PATH or --greedy")


@click.group()
def cli() -> None:
    """Controllable tile-map generation toolkit."""


@cli.command("train")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", type=click.Path(), help="Resume from this checkpoint.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default="runs/latest", show_default=True)
@click.option("--force", is_flag=True, help="Ignore a checkpoint config-hash mismatch.")
def cmd_train(config_path, checkpoint_path, seed, out_dir, force) -> None:
    """Train a policy with the configured teacher."""
    from condgen.train import train

    config = _apply_seed(load_config(config_path), seed)
    resume = load_checkpoint(checkpoint_path) if checkpoint_path else None
    path = train(config, out_dir, resume=resume, force=force, log=click.echo)
    click.echo(f"checkpoint written to {path}")


@cli.command("evaluate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", type=click.Path())
@click.option("--greedy", is_flag=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default="eval", show_default=True)
@click.option("--force", is_flag=True)
def cmd_evaluate(config_path, checkpoint_path, greedy, seed, out_dir, force) -> None:
    """Sweep the goal lattice and write CSV + JSON reports."""
    config = _apply_seed(load_config(config_path), seed)
    agent = _build_agent(config, checkpoint_path, greedy, force)
    domain = config.build_domain()
    control = config.build_control(domain)
    report = sweep(
        agent,
        domain,
        control,
        resolution=config.eval.resolution,
        episodes_per_cell=config.eval.episodes_per_cell,
        step_cap=config.eval.step_cap,
        seed=config.eval.seed,
        change_ratio=config.env.change_ratio,
    )
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_csv(report, out / "sweep.csv")
    write_json(report, out / "sweep.json")
    click.echo(summary_table(report))
    click.echo(f"reports written to {out / 'sweep.csv'} and {out / 'sweep.json'}")


def _parse_goal(text: str, control) -> np.ndarray:
    values: dict[str, int] = {}
    for part in text.split(","):
        if "=" not in part:
            raise ConfigError(f"goal entry {part!r} is not metric=value")
        name, _, raw = part.partition("=")
        name = name.strip()
        try:
            values[name] = int(raw)
        except ValueError:
            raise ConfigError(f"goal value for {name!r} is not an integer: {raw!r}") from None
    missing = set(control.controlled) - set(values)
    if missing:
        raise ConfigError(f"goal is missing controlled metric {sorted(missing)[0]!r}")
    extra = set(values) - set(control.controlled)
    if extra:
        raise ConfigError(f"goal names uncontrolled metric {sorted(extra)[0]!r}")
    return np.array([values[m] for m in control.controlled], dtype=np.int64)


@cli.command("generate")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", type=click.Path())
@click.option("--greedy", is_flag=True)
@click.option("--goal", "goals", multiple=True, required=True,
              help="metric=value[,metric=value]; repeatable.")
@click.option("--count", type=int, default=1, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(), default="levels", show_default=True)
@click.option("--force", is_flag=True)
def cmd_generate(config_path, checkpoint_path, greedy, goals, count, seed, out_dir, force) -> None:
    """Run inference episodes per goal and write the final levels."""
    if count < 0:
        raise ConfigError("--count must be non-negative")
    config = _apply_seed(load_config(config_path), seed)
    agent = _build_agent(config, checkpoint_path, greedy, force)
    domain = config.build_domain()
    control = config.build_control(domain)
    from condgen.env import CondGenEnv

    env = CondGenEnv(domain, control, change_ratio=config.env.change_ratio)
    cap = min(config.eval.step_cap, env.step_limit)
    goal_arrays = [(_parse_goal(g, control), g) for g in goals]
    for goal_array, _ in goal_arrays:
        control.validate_goal(goal_array)

    out = Path(out_dir)
    if count > 0:
        out.mkdir(parents=True, exist_ok=True)
    base_seed = config.eval.seed
    written = 0
    for gi, (goal_array, _) in enumerate(goal_arrays):
        for ep in range(count):
            _, s_final, grid, _ = run_episode(env, agent, goal_array, (base_seed, gi, ep), cap)
            stem = f"level_{gi:02d}_{ep:03d}"
            (out / f"{stem}.txt").write_text(render_level(grid, domain) + "\n")
            sidecar = {
                "goal": {m: int(v) for m, v in zip(control.controlled, goal_array)},
                "metrics": metrics_as_dict(domain, s_final),
            }
            (out / f"{stem}.json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")
            written += 1
    click.echo(f"wrote {written} level(s) to {out}")


@cli.command("analyze")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--out", "out_path", type=click.Path(), default=None,
              help="Write NDJSON here instead of stdout.")
@click.argument("level_files", nargs=-1, required=True, type=click.Path())
def cmd_analyze(config_path, out_path, level_files) -> None:
    """Print one JSON object of metrics per level file."""
    config = load_config(config_path)
    domain = config.build_domain()
    lines = []
    for path in level_files:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read level file: {exc}") from None
        grid = parse_level(text, domain)
        record = {"file": str(path), "metrics": metrics_as_dict(domain, metric_vector(domain, grid))}
        lines.append(json.dumps(record, sort_keys=True))
    output = "\n".join(lines) + "\n"
    if out_path:
        Path(out_path).write_text(output)
    else:
        click.echo(output, nl=False)


@cli.command("serve")
@click.option("--config", "config_path", required=True, type=click.Path())
@click.option("--checkpoint", "checkpoint_path", type=click.Path())
@click.option("--greedy", is_flag=True)
@click.option("--force", is_flag=True)
def cmd_serve(config_path, checkpoint_path, greedy, force) -> None:
    """Run the steering service (greedy agent unless a checkpoint is given)."""
    import uvicorn

    from condgen.serve import build_app

    config = load_config(config_path)
    if not checkpoint_path and not greedy:
        greedy = True
    agent = _build_agent(config, checkpoint_path, greedy, force)
    frontend = Path("frontend/dist")
    app = build_app(config, agent, frontend if frontend.is_dir() else None)
    click.echo(f"serving on ws://{config.service.host}:{config.service.port}/ws")
    uvicorn.run(app, host=config.service.host, port=config.service.port, log_level="warning")


def main() -> None:
    level = os.environ.get("CONDGEN_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))
    try:
        cli.main(standalone_mode=False)
    except click.ClickException as exc:
        exc.show()
        sys.exit(2)
    except click.Abort:
        sys.exit(2)
    except (ConfigError, GoalBoundsError, LevelFormatError, CheckpointError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(2)
    except DivergenceError as exc:
        click.echo(f"training diverged: {exc}", err=True)
        sys.exit(3)
    sys.exit(0)


if __name__ == "__main__":
    main()
