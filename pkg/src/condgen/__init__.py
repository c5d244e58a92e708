"""Controllable tile-map generation.

A small framework for training and steering level generators that edit a
tile grid one cell at a time toward user-chosen metric targets: connected
regions and path length for mazes, reachability layouts for dungeons,
solver-verified push puzzles.  Includes exact per-domain metrics, a
conditional editing environment with bit-exact telescoping rewards, a
learning-progress curriculum, a from-scratch clipped-surrogate trainer,
sweep-based evaluation, and a live steering service.
"""

from condgen.agents import GreedyAgent, PolicyAgent, RandomAgent, greedy_act
from condgen.curriculum import (
    AlpGmmTeacher,
    TaskRecord,
    UniformTeacher,
    compute_alp,
    fit_gmm,
    make_teacher,
    sample_alp_gmm,
    sample_uniform,
)
from condgen.env import (
    CondGenEnv,
    ControlSpec,
    EpisodeState,
    GoalBoundsError,
    Observation,
    StepResult,
    compute_loss,
)
from condgen.evaluate import (
    SweepReport,
    hamming_diversity,
    progress,
    sweep,
    write_csv,
    write_json,
)
from condgen.grids import (
    DomainSpec,
    GridBoundsError,
    LevelFormatError,
    TileGrid,
    apply_edit,
    crop_view,
    make_domain,
    parse_level,
    random_map,
    render_level,
)
from condgen.metrics import (
    count_regions,
    diameter_path_length,
    metric_vector,
    solve_sokoban,
    sokoban_metrics,
    zelda_metrics,
)

__version__ = "0.1.0"

__all__ = [
    "AlpGmmTeacher",
    "CondGenEnv",
    "ControlSpec",
    "DomainSpec",
    "EpisodeState",
    "GoalBoundsError",
    "GreedyAgent",
    "GridBoundsError",
    "LevelFormatError",
    "Observation",
    "PolicyAgent",
    "RandomAgent",
    "StepResult",
    "SweepReport",
    "TaskRecord",
    "TileGrid",
    "UniformTeacher",
    "apply_edit",
    "compute_alp",
    "compute_loss",
    "count_regions",
    "crop_view",
    "diameter_path_length",
    "fit_gmm",
    "greedy_act",
    "hamming_diversity",
    "make_domain",
    "make_teacher",
    "metric_vector",
    "parse_level",
    "progress",
    "random_map",
    "render_level",
    "sample_alp_gmm",
    "sample_uniform",
    "sokoban_metrics",
    "solve_sokoban",
    "sweep",
    "write_csv",
    "write_json",
    "zelda_metrics",
]
