"""Symbolic crossing gridworlds with one-hot channel observations."""

from __future__ import annotations

from collections import deque

import numpy as np

from ter.envs.base import Env, EnvStep, EpisodeOverError, TabularModel

EMPTY, WALL, LAVA, GOAL = 0, 1, 2, 3
N_CELL_TYPES = 4
N_CHANNELS = N_CELL_TYPES + 4  # cell type + agent heading

TURN_LEFT, TURN_RIGHT, FORWARD = 0, 1, 2
# heading 0 = east, clockwise
HEADINGS = ((1, 0), (0, 1), (-1, 0), (0, -1))


def generate_layout(width: int, height: int, n_rivers: int, obstacle: int,
                    rng: np.random.Generator) -> np.ndarray:
    """Bordered grid crossed by ``n_rivers`` obstacle lines, each with one gap.

    Rivers run along even interior rows/columns. Gaps are placed along a
    monotone room-to-room route from the top-left room to the bottom-right
    room, so the goal at ``(width-2, height-2)`` is always reachable from
    ``(1, 1)``.
    """
    grid = np.full((height, width), EMPTY, dtype=np.int8)
    grid[0, :] = grid[-1, :] = WALL
    grid[:, 0] = grid[:, -1] = WALL
    options = [("v", x) for x in range(2, width - 2, 2)] + [("h", y) for y in range(2, height - 2, 2)]
    if n_rivers > len(options):
        raise ValueError(f"{width}x{height} grid fits at most {len(options)} rivers")
    picked = [options[i] for i in rng.permutation(len(options))[:n_rivers]]
    xs = sorted(p for o, p in picked if o == "v")
    ys = sorted(p for o, p in picked if o == "h")
    for x in xs:
        grid[1:-1, x] = obstacle
    for y in ys:
        grid[y, 1:-1] = obstacle
    # room bounds along each axis: interior segments between rivers
    col_bounds = list(zip([1] + [x + 1 for x in xs], [x - 1 for x in xs] + [width - 2]))
    row_bounds = list(zip([1] + [y + 1 for y in ys], [y - 1 for y in ys] + [height - 2]))
    moves = ["v"] * len(xs) + ["h"] * len(ys)
    moves = [moves[i] for i in rng.permutation(len(moves))]
    rc = rr = 0
    for m in moves:
        if m == "v":
            lo, hi = row_bounds[rr]
            grid[int(rng.integers(lo, hi + 1)), xs[rc]] = EMPTY
            rc += 1
        else:
            lo, hi = col_bounds[rc]
            grid[ys[rr], int(rng.integers(lo, hi + 1))] = EMPTY
            rr += 1
    grid[height - 2, width - 2] = GOAL
    return grid


def reachable(grid: np.ndarray, start: tuple[int, int] = (1, 1)) -> bool:
    """BFS over passable cells (empty or goal) from ``start``; True if a goal is reached."""
    h, w = grid.shape
    seen = np.zeros_like(grid, dtype=bool)
    frontier = deque([start])
    seen[start[1], start[0]] = True
    while frontier:
        x, y = frontier.popleft()
        if grid[y, x] == GOAL:
            return True
        for dx, dy in HEADINGS:
            nx, ny = x + dx, y + dy
            if 0 <= nx < w and 0 <= ny < h and not seen[ny, nx] and grid[ny, nx] in (EMPTY, GOAL):
                seen[ny, nx] = True
                frontier.append((nx, ny))
    return False


class GridEnv(Env):
    """Crossing task: reach the bottom-right goal from the top-left corner.

    ``variant`` is ``"lava"`` (rivers of lava, entering one ends the episode
    with ``-max_steps``) or ``"simple"`` (rivers of wall). Reaching the goal
    pays ``+max_steps`` and ends the episode; every other step pays ``-1``.

    With ``nonterminal=True`` the goal never ends the episode: entering it
    pays ``+max_steps``, leaving it ``-max_steps`` and staying ``0``. Lava
    still terminates.

    The layout is regenerated from the reset ``rng`` unless ``layout_seed``
    pins one map for every episode.
    """

    def __init__(
        self,
        width: int = 7,
        height: int = 7,
        variant: str = "lava",
        n_rivers: int = 1,
        max_steps: int | None = None,
        nonterminal: bool = False,
        layout_seed: int | None = None,
    ):
        if variant not in ("lava", "simple"):
            raise ValueError(f"unknown crossing variant {variant!r}")
        if width < 5 or height < 5:
            raise ValueError("crossing grids need width and height >= 5")
        self.width, self.height = width, height
        self.variant = variant
        self.n_rivers = n_rivers
        self.obstacle = LAVA if variant == "lava" else WALL
        self.max_steps = 4 * width * height if max_steps is None else max_steps
        self.nonterminal = nonterminal
        self.layout_seed = layout_seed
        self.n_actions = 3
        self.obs_dim = width * height * N_CHANNELS
        self.grid: np.ndarray | None = None
        self._base: np.ndarray | None = None
        self.pos = (1, 1)
        self.heading = 0
        self.steps = 0
        self.done = True

    @property
    def return_bounds(self) -> tuple[float, float]:
        m = float(self.max_steps)
        if self.variant == "lava":
            # m - 1 penalties then a lava step on the last tick
            return 1.0 - 2.0 * m, m
        return -m, m

    def set_layout(self, grid: np.ndarray) -> None:
        if grid.shape != (self.height, self.width):
            raise ValueError("layout shape mismatch")
        self.grid = np.array(grid, dtype=np.int8)
        base = np.zeros((self.height, self.width, N_CHANNELS), dtype=np.uint8)
        ys, xs = np.indices(grid.shape)
        base[ys, xs, self.grid] = 1
        self._base = base

    def new_layout(self, rng: np.random.Generator) -> np.ndarray:
        if self.layout_seed is not None:
            rng = np.random.default_rng(self.layout_seed)
        return generate_layout(self.width, self.height, self.n_rivers, self.obstacle, rng)

    def observe(self, state: tuple[int, int, int]) -> np.ndarray:
        x, y, heading = state
        obs = self._base.copy()
        obs[y, x, N_CELL_TYPES + heading] = 1
        return obs.reshape(-1)

    def reset(self, rng: np.random.Generator) -> np.ndarray:
        self.set_layout(self.new_layout(rng))
        self.pos = (1, 1)
        self.heading = 0
        self.steps = 0
        self.done = False
        return self.observe((1, 1, 0))

    def _transition(self, state: tuple[int, int, int], action: int):
        x, y, heading = state
        was_goal = self.grid[y, x] == GOAL
        if action == TURN_LEFT:
            heading = (heading - 1) % 4
        elif action == TURN_RIGHT:
            heading = (heading + 1) % 4
        elif action == FORWARD:
            dx, dy = HEADINGS[heading]
            if self.grid[y + dy, x + dx] != WALL:
                x, y = x + dx, y + dy
        else:
            raise ValueError(f"invalid action {action}")
        m = float(self.max_steps)
        cell = self.grid[y, x]
        if cell == LAVA:
            return (x, y, heading), -m, True
        if cell == GOAL:
            if not self.nonterminal:
                return (x, y, heading), m, True
            return (x, y, heading), (0.0 if was_goal else m), False
        if was_goal:
            return (x, y, heading), -m, False
        return (x, y, heading), -1.0, False

    def step(self, action: int) -> EnvStep:
        if self.done:
            raise EpisodeOverError("step after the episode ended")
        state, reward, terminal = self._transition((*self.pos, self.heading), int(action))
        self.pos, self.heading = state[:2], state[2]
        self.steps += 1
        timeout = not terminal and self.steps >= self.max_steps
        self.done = terminal or timeout
        return EnvStep(self.observe(state), reward, terminal, timeout)

    def model(self) -> TabularModel:
        """Exact dynamics for the current layout (call ``reset`` or ``set_layout`` first)."""
        if self.grid is None:
            raise RuntimeError("no layout: reset the environment first")
        passable = (EMPTY, GOAL) if self.nonterminal else (EMPTY,)
        states = [
            (x, y, hd)
            for y in range(self.height)
            for x in range(self.width)
            if self.grid[y, x] in passable
            for hd in range(4)
        ]

        def outcomes(state, a):
            nxt, r, term = self._transition(state, a)
            return [(1.0, nxt, r, term)]

        return TabularModel(states, self.n_actions, outcomes, self.observe)
