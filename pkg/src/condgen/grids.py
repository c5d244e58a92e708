"""Tile grids, editing domains, and the level text format.

Three domains are built in:

- ``binary``: floor/wall mazes (14x14 by default).
- ``zelda``: a small dungeon with a player, key, door and enemies (7x11).
- ``sokoban``: the box-pushing puzzle on a very small board (5x5).

Grids are value-semantics snapshots: ``apply_edit`` returns a new grid and
leaves its input untouched.  Levels serialize to a one-line-per-row ASCII
format with a per-domain glyph alphabet.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class LevelFormatError(ValueError):
    """Raised when level text has ragged rows or unknown characters."""


class GridBoundsError(IndexError):
    """Raised when an edit position lies outside the grid."""


# Tile ids, fixed per domain (index into DomainSpec.alphabet).
BINARY_FLOOR, BINARY_WALL = 0, 1
ZELDA_EMPTY, ZELDA_WALL, ZELDA_PLAYER, ZELDA_KEY, ZELDA_DOOR, ZELDA_ENEMY = range(6)
SOKO_EMPTY, SOKO_WALL, SOKO_PLAYER, SOKO_CRATE, SOKO_TARGET = range(5)


@dataclass(frozen=True)
class DomainSpec:
    """Static description of one editing domain.

    ``metric_bounds`` are estimated lower/upper bounds for each metric on
    the domain's default map size; goal sampling and the undefined-metric
    penalty both derive from them.
    """

    name: str
    alphabet: tuple[str, ...]
    glyphs: tuple[str, ...]
    default_size: tuple[int, int]  # (height, width)
    metric_names: tuple[str, ...]
    metric_bounds: dict[str, tuple[int, int]] = field(repr=False)
    pad_tile: int = 1
    solver_budget: int = 200_000

    def __post_init__(self) -> None:
        if len(self.alphabet) != len(self.glyphs):
            raise ValueError("alphabet and glyphs must align")
        if len(set(self.metric_names)) != len(self.metric_names):
            raise ValueError("duplicate metric names")
        for name in self.metric_names:
            lo, hi = self.metric_bounds[name]
            if lo > hi:
                raise ValueError(f"metric {name}: bound low {lo} > high {hi}")
        h, w = self.default_size
        if h < 3 or w < 3:
            raise ValueError("default size must be at least 3x3")
        if not 0 <= self.pad_tile < len(self.alphabet):
            raise ValueError("pad tile outside alphabet")

    @property
    def n_tiles(self) -> int:
        return len(self.alphabet)

    @property
    def height(self) -> int:
        return self.default_size[0]

    @property
    def width(self) -> int:
        return self.default_size[1]

    def tile_id(self, name: str) -> int:
        return self.alphabet.index(name)


@dataclass
class TileGrid:
    """A 2D tile map; ``cells`` is a row-major (height, width) int array."""

    cells: np.ndarray

    def __post_init__(self) -> None:
        cells = np.asarray(self.cells, dtype=np.int8)
        if cells.ndim != 2 or cells.size == 0:
            raise ValueError("cells must be a non-empty 2D array")
        self.cells = cells

    @property
    def height(self) -> int:
        return int(self.cells.shape[0])

    @property
    def width(self) -> int:
        return int(self.cells.shape[1])

    def copy(self) -> "TileGrid":
        return TileGrid(self.cells.copy())

    def same_cells(self, other: "TileGrid") -> bool:
        return bool(np.array_equal(self.cells, other.cells))


def longest_path_bound(height: int, width: int) -> int:
    """Estimated upper bound on the longest shortest path for a map size.

    Matches the zig-zag estimate used for the 14x14 binary board (112).
    """
    return math.ceil(width / 2 + 1) * height


def binary_domain(height: int = 14, width: int = 14) -> DomainSpec:
    return DomainSpec(
        name="binary",
        alphabet=("floor", "wall"),
        glyphs=(".", "#"),
        default_size=(height, width),
        metric_names=("regions", "path_length"),
        metric_bounds={
            "regions": (0, math.ceil(height * width / 2)),
            "path_length": (0, longest_path_bound(height, width)),
        },
        pad_tile=BINARY_WALL,
    )


def zelda_domain(height: int = 7, width: int = 11) -> DomainSpec:
    reach = longest_path_bound(height, width)
    return DomainSpec(
        name="zelda",
        alphabet=("empty", "wall", "player", "key", "door", "enemy"),
        glyphs=(".", "#", "P", "K", "D", "E"),
        default_size=(height, width),
        metric_names=(
            "player_count",
            "key_count",
            "door_count",
            "enemy_count",
            "nearest_enemy",
            "path_length",
        ),
        metric_bounds={
            "player_count": (0, height * width),
            "key_count": (0, height * width),
            "door_count": (0, height * width),
            "enemy_count": (0, height * width),
            "nearest_enemy": (0, reach),
            "path_length": (0, 2 * reach),
        },
        pad_tile=ZELDA_WALL,
    )


def sokoban_domain(height: int = 5, width: int = 5, solver_budget: int = 200_000) -> DomainSpec:
    return DomainSpec(
        name="sokoban",
        alphabet=("empty", "wall", "player", "crate", "target"),
        glyphs=(".", "#", "P", "C", "T"),
        default_size=(height, width),
        metric_names=("player_count", "crate_count", "target_count", "solution_length"),
        metric_bounds={
            "player_count": (0, height * width),
            "crate_count": (0, height * width),
            "target_count": (0, height * width),
            "solution_length": (0, 2 * height * width),
        },
        pad_tile=SOKO_WALL,
        solver_budget=solver_budget,
    )


_DOMAIN_FACTORIES = {
    "binary": binary_domain,
    "zelda": zelda_domain,
    "sokoban": sokoban_domain,
}


def make_domain(
    name: str,
    size: tuple[int, int] | None = None,
    solver_budget: int | None = None,
) -> DomainSpec:
    """Build a DomainSpec by name, optionally overriding (height, width)."""
    try:
        factory = _DOMAIN_FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown domain {name!r}") from None
    kwargs: dict = {}
    if size is not None:
        kwargs["height"], kwargs["width"] = int(size[0]), int(size[1])
    if solver_budget is not None and name == "sokoban":
        kwargs["solver_budget"] = int(solver_budget)
    return factory(**kwargs)


def random_map(domain: DomainSpec, seed: int | np.random.Generator | None = None) -> TileGrid:
    """Draw a default-size grid with i.i.d. uniform tiles, reproducible from seed."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    h, w = domain.default_size
    cells = rng.integers(0, domain.n_tiles, size=(h, w), dtype=np.int8)
    return TileGrid(cells)


def apply_edit(
    grid: TileGrid,
    pos: tuple[int, int],
    tile: int,
    n_tiles: int | None = None,
) -> tuple[TileGrid, bool]:
    """Write ``tile`` at ``pos``; returns (new grid, whether the cell changed).

    The input grid is never mutated.  Pass ``n_tiles`` to also validate the
    tile id against the domain alphabet.
    """
    r, c = pos
    if not (0 <= r < grid.height and 0 <= c < grid.width):
        raise GridBoundsError(f"edit position {pos} outside {grid.height}x{grid.width} grid")
    if n_tiles is not None and not 0 <= tile < n_tiles:
        raise ValueError(f"tile id {tile} outside alphabet of size {n_tiles}")
    changed = int(grid.cells[r, c]) != int(tile)
    if not changed:
        return grid.copy(), False
    out = grid.copy()
    out.cells[r, c] = tile
    return out, True


def crop_view(grid: TileGrid, center: tuple[int, int], domain: DomainSpec) -> np.ndarray:
    """One-hot (2H-1, 2W-1, n_tiles) view with ``center`` at the middle.

    Cells beyond the true grid are encoded as the domain pad tile, so the
    output shape is independent of the center position.
    """
    r, c = center
    h, w = grid.height, grid.width
    if not (0 <= r < h and 0 <= c < w):
        raise GridBoundsError(f"center {center} outside {h}x{w} grid")
    ids = np.full((2 * h - 1, 2 * w - 1), domain.pad_tile, dtype=np.int8)
    top, left = h - 1 - r, w - 1 - c
    ids[top : top + h, left : left + w] = grid.cells
    return np.eye(domain.n_tiles, dtype=np.float32)[ids]


def parse_level(text: str, domain: DomainSpec) -> TileGrid:
    """Parse the one-line-per-row ASCII format; strict about unknown glyphs."""
    lines = [line for line in text.splitlines() if line != ""]
    if not lines:
        raise LevelFormatError("empty level text")
    width = len(lines[0])
    lookup = {glyph: tid for tid, glyph in enumerate(domain.glyphs)}
    rows = []
    for i, line in enumerate(lines):
        if len(line) != width:
            raise LevelFormatError(f"ragged row {i}: expected width {width}, got {len(line)}")
        try:
            rows.append([lookup[ch] for ch in line])
        except KeyError as exc:
            raise LevelFormatError(f"unknown tile character {exc.args[0]!r} in row {i}") from None
    return TileGrid(np.array(rows, dtype=np.int8))


def render_level(grid: TileGrid, domain: DomainSpec) -> str:
    """Inverse of parse_level; no trailing newline."""
    return "\n".join(
        "".join(domain.glyphs[int(t)] for t in row) for row in grid.cells
    )
