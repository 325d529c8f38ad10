"""Grid world model for block-construction planning.

Cells are addressed as (x, y) tuples over an X*Y footprint.  A world is a
dense height map plus agents standing on top of columns; border cells form
the perimeter ring, never hold blocks, and are the only entry/exit points.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, NamedTuple

Pos = tuple[int, int]

# Sentinel position for agents that are outside the grid.
OFF_GRID = "off"

# Action kind codes (one char, also the wire format).
ENTER = "E"
LEAVE = "L"
DELIVER = "D"
PICKUP = "P"
MOVE = "M"
WAIT = "W"

KINDS = frozenset((ENTER, LEAVE, DELIVER, PICKUP, MOVE, WAIT))


class ModelError(ValueError):
    """Invalid instance, world, or action data."""


@dataclass(frozen=True, slots=True)
class GridSpec:
    """Grid dimensions: x_size * y_size footprint, z_size block levels."""

    x_size: int
    y_size: int
    z_size: int

    def __post_init__(self) -> None:
        if self.x_size < 3 or self.y_size < 3:
            raise ModelError("grid needs x_size >= 3 and y_size >= 3 for an interior")
        if self.z_size < 1:
            raise ModelError("z_size must be >= 1")

    def contains(self, p: Pos) -> bool:
        return 0 <= p[0] < self.x_size and 0 <= p[1] < self.y_size

    def is_border(self, p: Pos) -> bool:
        x, y = p
        return x == 0 or y == 0 or x == self.x_size - 1 or y == self.y_size - 1

    def is_interior(self, p: Pos) -> bool:
        return self.contains(p) and not self.is_border(p)


def neighbors(p: Pos, g: GridSpec) -> list[Pos]:
    """In-grid 4-neighbors of p in the fixed order +x, -x, +y, -y.

    This order is the single tie-break order inherited by every DFS and
    scan downstream, which keeps all plans deterministic.
    """
    x, y = p
    out = []
    if x + 1 < g.x_size:
        out.append((x + 1, y))
    if x - 1 >= 0:
        out.append((x - 1, y))
    if y + 1 < g.y_size:
        out.append((x, y + 1))
    if y - 1 >= 0:
        out.append((x, y - 1))
    return out


def border_cells(g: GridSpec) -> list[Pos]:
    """Perimeter cells in row-major (x, then y) order; 2X + 2Y - 4 of them."""
    out = []
    for x in range(g.x_size):
        for y in range(g.y_size):
            if g.is_border((x, y)):
                out.append((x, y))
    return out


def interior_cells(g: GridSpec) -> list[Pos]:
    return [
        (x, y)
        for x in range(1, g.x_size - 1)
        for y in range(1, g.y_size - 1)
    ]


@dataclass(frozen=True)
class Instance:
    """A problem statement: grid plus the target height map."""

    grid: GridSpec
    target: tuple[tuple[int, ...], ...]  # target[x][y] = block count

    def __post_init__(self) -> None:
        g = self.grid
        if len(self.target) != g.x_size or any(len(col) != g.y_size for col in self.target):
            raise ModelError("target shape must match grid footprint")
        for x in range(g.x_size):
            for y in range(g.y_size):
                h = self.target[x][y]
                if not 0 <= h <= g.z_size:
                    raise ModelError(f"target height at {(x, y)} out of range: {h}")
                if h > 0 and g.is_border((x, y)):
                    raise ModelError(f"border cell {(x, y)} cannot hold blocks")

    @staticmethod
    def from_heights(x: int, y: int, z: int, heights: Iterable[Iterable[int]]) -> "Instance":
        return Instance(GridSpec(x, y, z), tuple(tuple(col) for col in heights))

    def total_blocks(self) -> int:
        return sum(sum(col) for col in self.target)

    def to_json_dict(self) -> dict:
        return {
            "x": self.grid.x_size,
            "y": self.grid.y_size,
            "z": self.grid.z_size,
            "heights": [list(col) for col in self.target],
        }

    @staticmethod
    def from_json_dict(data: dict) -> "Instance":
        try:
            x, y, z = int(data["x"]), int(data["y"]), int(data["z"])
            heights = data["heights"]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed instance JSON: {exc}") from exc
        if not isinstance(heights, list) or any(not isinstance(c, list) for c in heights):
            raise ModelError("instance 'heights' must be a list of lists")
        return Instance.from_heights(x, y, z, heights)


class Action(NamedTuple):
    """One primitive agent action occupying one timestep.

    `frm`/`to` are grid cells or OFF_GRID (Enter comes from off-grid, Leave
    goes off-grid, and an off-grid Wait is the padding no-op).  `carrying`
    is the agent's carry flag at the start of the action.
    """

    kind: str
    agent: int
    frm: Pos | str
    to: Pos | str
    carrying: bool

    def is_offgrid_noop(self) -> bool:
        return self.kind == WAIT and self.frm == OFF_GRID


def enter(agent: int, cell: Pos, carrying: bool) -> Action:
    return Action(ENTER, agent, OFF_GRID, cell, carrying)


def leave(agent: int, cell: Pos, carrying: bool) -> Action:
    return Action(LEAVE, agent, cell, OFF_GRID, carrying)


def move(agent: int, frm: Pos, to: Pos, carrying: bool) -> Action:
    return Action(MOVE, agent, frm, to, carrying)


def deliver(agent: int, frm: Pos, to: Pos) -> Action:
    return Action(DELIVER, agent, frm, to, True)


def pick_up(agent: int, frm: Pos, to: Pos) -> Action:
    return Action(PICKUP, agent, frm, to, False)


def wait(agent: int, cell: Pos | str, carrying: bool) -> Action:
    return Action(WAIT, agent, cell, cell, carrying)


def offgrid_wait(agent: int) -> Action:
    return Action(WAIT, agent, OFF_GRID, OFF_GRID, False)


@dataclass(frozen=True)
class AgentState:
    pos: Pos
    carrying: bool


@dataclass(frozen=True)
class WorldState:
    """Immutable world snapshot: heights, on-grid agents, timestep."""

    heights: tuple[tuple[int, ...], ...]
    agents: dict[int, AgentState] = field(default_factory=dict)
    timestep: int = 0

    def height(self, p: Pos) -> int:
        return self.heights[p[0]][p[1]]

    @staticmethod
    def empty(g: GridSpec) -> "WorldState":
        return WorldState(tuple((0,) * g.y_size for _ in range(g.x_size)))

    @staticmethod
    def from_target(inst: Instance) -> "WorldState":
        return WorldState(inst.target)


def ramp_areas(heights, g: GridSpec) -> list[set[Pos]]:
    """Connected components of height-0 interior cells that touch the border.

    Components sealed off from the border ring (pockets walled in by
    columns) are excluded.  Order is deterministic: by smallest member in
    row-major order.
    """
    seen: set[Pos] = set()
    areas: list[set[Pos]] = []
    for x in range(1, g.x_size - 1):
        for y in range(1, g.y_size - 1):
            start = (x, y)
            if start in seen or heights[x][y] != 0:
                continue
            comp: set[Pos] = set()
            touches_border = False
            stack = [start]
            seen.add(start)
            while stack:
                p = stack.pop()
                comp.add(p)
                for q in neighbors(p, g):
                    if g.is_border(q):
                        touches_border = True
                        continue
                    if q not in seen and heights[q[0]][q[1]] == 0:
                        seen.add(q)
                        stack.append(q)
            if touches_border:
                areas.append(comp)
    return areas


def iter_cells(g: GridSpec) -> Iterator[Pos]:
    for x in range(g.x_size):
        for y in range(g.y_size):
            yield (x, y)
