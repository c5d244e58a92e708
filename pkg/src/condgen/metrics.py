"""Per-domain level metrics.

Everything here is an exact combinatorial computation on the grid: connected
regions and graph diameter for binary maps, BFS path metrics for zelda, and a
breadth-first solver over (player, crates) states for sokoban.  Metrics that
have no defined value on a given grid (a missing player, an unsolvable
puzzle) report the sentinel -1.

All functions are pure and safe to call from parallel rollout workers.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from condgen.grids import (
    BINARY_FLOOR,
    SOKO_CRATE,
    SOKO_PLAYER,
    SOKO_TARGET,
    SOKO_WALL,
    ZELDA_DOOR,
    ZELDA_ENEMY,
    ZELDA_KEY,
    ZELDA_PLAYER,
    ZELDA_WALL,
    DomainSpec,
    TileGrid,
)

_DIRS = ((-1, 0), (1, 0), (0, -1), (0, 1))

UNDEFINED = -1


def _passable_graph(mask: np.ndarray) -> tuple[list[tuple[int, int]], list[list[int]]]:
    """Adjacency lists over the True cells of a boolean mask (4-connectivity)."""
    h, w = mask.shape
    index = np.full((h, w), -1, dtype=np.int32)
    coords = [(int(r), int(c)) for r, c in np.argwhere(mask)]
    for i, (r, c) in enumerate(coords):
        index[r, c] = i
    neighbors: list[list[int]] = []
    for r, c in coords:
        adj = []
        for dr, dc in _DIRS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and index[nr, nc] >= 0:
                adj.append(int(index[nr, nc]))
        neighbors.append(adj)
    return coords, neighbors


def count_regions(grid: TileGrid, passable: set[int]) -> int:
    """Number of 4-connected components of passable cells; 0 if none."""
    mask = np.isin(grid.cells, list(passable))
    _, neighbors = _passable_graph(mask)
    n = len(neighbors)
    seen = [False] * n
    regions = 0
    for start in range(n):
        if seen[start]:
            continue
        regions += 1
        seen[start] = True
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for nxt in neighbors[node]:
                if not seen[nxt]:
                    seen[nxt] = True
                    queue.append(nxt)
    return regions


def _bfs_from(neighbors: list[list[int]], start: int) -> list[int]:
    dist = [-1] * len(neighbors)
    dist[start] = 0
    queue = deque([start])
    while queue:
        node = queue.popleft()
        d = dist[node] + 1
        for nxt in neighbors[node]:
            if dist[nxt] < 0:
                dist[nxt] = d
                queue.append(nxt)
    return dist


def diameter_path_length(grid: TileGrid, passable: set[int]) -> int:
    """Longest shortest path (in edges) over mutually reachable passable cells.

    0 when fewer than two mutually reachable passable cells exist.
    """
    mask = np.isin(grid.cells, list(passable))
    _, neighbors = _passable_graph(mask)
    best = 0
    for start in range(len(neighbors)):
        dist = _bfs_from(neighbors, start)
        far = max(dist)
        if far > best:
            best = far
    return best


def _grid_bfs(mask: np.ndarray, start: tuple[int, int]) -> np.ndarray:
    """Distance field over True cells from start; -1 where unreachable."""
    h, w = mask.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if not mask[start]:
        return dist
    dist[start] = 0
    queue = deque([start])
    while queue:
        r, c = queue.popleft()
        d = dist[r, c] + 1
        for dr, dc in _DIRS:
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = d
                queue.append((nr, nc))
    return dist


def zelda_metrics(grid: TileGrid) -> np.ndarray:
    """{player, key, door, enemy} counts plus two path metrics.

    nearest_enemy: BFS distance from the (unique) player to the closest
    enemy; path_length: BFS(player->key) + BFS(key->door).  Walls block
    movement, every other tile is walkable.  A path metric is -1 when its
    endpoints are not uniquely present (any number of enemies is fine for
    nearest_enemy, but the player must be unique) or unreachable.
    """
    cells = grid.cells
    players = [(int(r), int(c)) for r, c in np.argwhere(cells == ZELDA_PLAYER)]
    keys = [(int(r), int(c)) for r, c in np.argwhere(cells == ZELDA_KEY)]
    doors = [(int(r), int(c)) for r, c in np.argwhere(cells == ZELDA_DOOR)]
    enemies = [(int(r), int(c)) for r, c in np.argwhere(cells == ZELDA_ENEMY)]
    walkable = cells != ZELDA_WALL

    nearest_enemy = UNDEFINED
    from_player: np.ndarray | None = None
    if len(players) == 1 and enemies:
        from_player = _grid_bfs(walkable, players[0])
        reachable = [int(from_player[pos]) for pos in enemies if from_player[pos] >= 0]
        if reachable:
            nearest_enemy = min(reachable)

    path_length = UNDEFINED
    if len(players) == 1 and len(keys) == 1 and len(doors) == 1:
        if from_player is None:
            from_player = _grid_bfs(walkable, players[0])
        to_key = int(from_player[keys[0]])
        key_to_door = int(_grid_bfs(walkable, keys[0])[doors[0]])
        if to_key >= 0 and key_to_door >= 0:
            path_length = to_key + key_to_door

    return np.array(
        [len(players), len(keys), len(doors), len(enemies), nearest_enemy, path_length],
        dtype=np.int64,
    )


@dataclass(frozen=True)
class SokobanResult:
    """Outcome of one solver run.

    status distinguishes a proven dead end from running out of search
    budget; length is the move count of a shortest solution, -1 otherwise.
    """

    status: str  # "solved" | "unsolvable" | "malformed" | "budget_exhausted"
    length: int
    nodes: int  # states expanded


def solve_sokoban_state(
    walls: np.ndarray,
    player: tuple[int, int],
    crates: frozenset[tuple[int, int]],
    targets: frozenset[tuple[int, int]],
    node_budget: int,
) -> SokobanResult:
    """BFS over (player position, crate set) states, counting player moves.

    Stepping into a crate pushes it one cell if that cell is free; the goal
    is crates == targets.  Exceeding node_budget expanded states reports
    budget_exhausted rather than a verdict.
    """
    h, w = walls.shape
    if crates == targets:
        return SokobanResult("solved", 0, 0)
    start = (player, crates)
    seen = {start}
    queue: deque[tuple[tuple[int, int], frozenset[tuple[int, int]], int]] = deque(
        [(player, crates, 0)]
    )
    expanded = 0
    while queue:
        pos, cs, depth = queue.popleft()
        expanded += 1
        if expanded > node_budget:
            return SokobanResult("budget_exhausted", -1, expanded)
        for dr, dc in _DIRS:
            nr, nc = pos[0] + dr, pos[1] + dc
            if not (0 <= nr < h and 0 <= nc < w) or walls[nr, nc]:
                continue
            step_to = (nr, nc)
            if step_to in cs:
                br, bc = nr + dr, nc + dc
                if not (0 <= br < h and 0 <= bc < w) or walls[br, bc] or (br, bc) in cs:
                    continue
                new_crates = (cs - {step_to}) | {(br, bc)}
                if new_crates == targets:
                    return SokobanResult("solved", depth + 1, expanded)
                state = (step_to, new_crates)
            else:
                new_crates = cs
                state = (step_to, cs)
            if state not in seen:
                seen.add(state)
                queue.append((step_to, new_crates, depth + 1))
    return SokobanResult("unsolvable", -1, expanded)


def solve_sokoban(grid: TileGrid, node_budget: int = 200_000) -> SokobanResult:
    """Parse a sokoban grid and solve it; malformed layouts are not searched.

    Malformed: player count != 1, no crates, or crate/target counts differ.
    """
    cells = grid.cells
    players = [(int(r), int(c)) for r, c in np.argwhere(cells == SOKO_PLAYER)]
    crates = [(int(r), int(c)) for r, c in np.argwhere(cells == SOKO_CRATE)]
    targets = [(int(r), int(c)) for r, c in np.argwhere(cells == SOKO_TARGET)]
    if len(players) != 1 or len(crates) == 0 or len(crates) != len(targets):
        return SokobanResult("malformed", -1, 0)
    walls = cells == SOKO_WALL
    return solve_sokoban_state(
        walls, players[0], frozenset(crates), frozenset(targets), node_budget
    )


def sokoban_metrics(grid: TileGrid, node_budget: int = 200_000) -> np.ndarray:
    """Counts plus solution_length; every non-solved status folds to -1."""
    cells = grid.cells
    player_count = int((cells == SOKO_PLAYER).sum())
    crate_count = int((cells == SOKO_CRATE).sum())
    target_count = int((cells == SOKO_TARGET).sum())
    result = solve_sokoban(grid, node_budget)
    length = result.length if result.status == "solved" else UNDEFINED
    return np.array([player_count, crate_count, target_count, length], dtype=np.int64)


def metric_vector(domain: DomainSpec, grid: TileGrid) -> np.ndarray:
    """The metric vector for a grid, ordered as domain.metric_names."""
    if domain.name == "binary":
        floor = {BINARY_FLOOR}
        return np.array(
            [count_regions(grid, floor), diameter_path_length(grid, floor)],
            dtype=np.int64,
        )
    if domain.name == "zelda":
        return zelda_metrics(grid)
    if domain.name == "sokoban":
        return sokoban_metrics(grid, domain.solver_budget)
    raise ValueError(f"no metrics defined for domain {domain.name!r}")


def metrics_as_dict(domain: DomainSpec, vector: np.ndarray) -> dict[str, int]:
    return {name: int(v) for name, v in zip(domain.metric_names, vector)}
