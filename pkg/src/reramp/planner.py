"""Construction planners built on reversible ramps.

Planning runs in deconstruction order: starting from the finished target,
a depth-first sweep from a border access point eats the structure column
by column (simple ramps first, compound ramps for columns out of simple
reach), and the recorded action sequence is reversed into a construction
plan at the end.  Work is split between agents by assigning every interior
cell to its closest border cell, then merging areas pairwise until one
agent covers the grid.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Action,
    GridSpec,
    Instance,
    Pos,
    border_cells,
    neighbors,
)
from .ramps import Ramp, RampRun, ramp_capacities, rft
from .validator import AgentPlan, MultiPlan, exclusion_zone, offgrid_wait, reverse_plan


class SpanTree:
    """Rooted spanning tree over cleared cells; children keep the fixed
    neighbor order so every derived path and ramp is deterministic."""

    def __init__(self, root: Pos):
        self.root = root
        self.parent: dict[Pos, Pos] = {}
        self.children: dict[Pos, list[Pos]] = {root: []}
        self._depth: dict[Pos, int] = {root: 0}

    def add(self, node: Pos, parent: Pos) -> None:
        if node in self._depth:
            raise ValueError(f"{node} already in the tree")
        self.parent[node] = parent
        self.children[parent].append(node)
        self.children[node] = []
        self._depth[node] = self._depth[parent] + 1

    def has_node(self, p: Pos) -> bool:
        return p in self._depth

    def children_of(self, p: Pos) -> list[Pos]:
        return self.children.get(p, [])

    def depth(self, p: Pos) -> int:
        return self._depth[p]

    def path_to(self, p: Pos) -> list[Pos]:
        out = [p]
        while p != self.root:
            p = self.parent[p]
            out.append(p)
        out.reverse()
        return out

    def farthest_in_branch(self, child: Pos) -> Pos:
        """Deepest node of the subtree rooted at child; first found wins."""
        best, best_d = child, 0
        stack = [(child, 0)]
        while stack:
            node, d = stack.pop()
            if d > best_d:
                best, best_d = node, d
            kids = self.children_of(node)
            for c in reversed(kids):
                stack.append((c, d + 1))
        return best

    def nodes(self) -> set[Pos]:
        return set(self._depth)


@dataclass(frozen=True)
class PendingColumn:
    """A structure column too tall for the current pass, kept for retry."""

    column: Pos
    via_neighbor: Pos
    height: int


@dataclass
class PassResult:
    tree: SpanTree
    actions: list[Action]
    pending: list[PendingColumn]


class _AreaPlanner:
    """One deconstruction pass of a single agent over its assigned area."""

    def __init__(self, grid: GridSpec, heights, area: set[Pos], v0: Pos,
                 i_r: int, agent: int):
        self.g = grid
        self.h = heights
        self.area = area
        self.v0 = v0
        self.i_r = i_r
        self.agent = agent
        self.tree = SpanTree(v0)
        self.acts: list[Action] = []
        self.pending: list[PendingColumn] = []
        self._pending_cells: set[Pos] = set()
        self.ride: RampRun | None = None

    def run(self) -> PassResult:
        self._explore(self.v0, pass_i_r=0)
        self._drop_ride()
        i = 0
        while i < len(self.pending):
            pc = self.pending[i]
            i += 1
            if self.h[pc.column[0]][pc.column[1]] == 0:
                continue
            self.clear_pending(pc)
        self._drop_ride()
        return PassResult(self.tree, self.acts, self.pending)

    def clear_pending(self, pc: PendingColumn) -> bool:
        """Compound-ramp attempt on one recorded column, trying a ramp from
        each of its spanning-tree neighbors; on success the cleared cell
        joins the tree and the sweep continues behind it."""
        for vn in neighbors(pc.column, self.g):
            if not self.tree.has_node(vn) or self.g.is_border(vn):
                continue
            ramp = rft(self.tree, vn, self.i_r)
            m = self.h[pc.column[0]][pc.column[1]]
            if m <= ramp_capacities(ramp).reach + 1:
                self._drop_ride()
                self._clear_column(ramp, pc.column, m)
                self.tree.add(pc.column, vn)
                self._explore(pc.column, pass_i_r=self.i_r)
                self._drop_ride()
                return True
        return False

    # -- depth-first sweep -----------------------------------------------------

    def _explore(self, start: Pos, pass_i_r: int) -> None:
        stack = [(start, iter(neighbors(start, self.g)))]
        while stack:
            node, it = stack[-1]
            advanced = False
            for w in it:
                if self.g.is_border(w) or w not in self.area or self.tree.has_node(w):
                    continue
                if self.h[w[0]][w[1]] == 0:
                    self.tree.add(w, node)
                    stack.append((w, iter(neighbors(w, self.g))))
                    advanced = True
                    break
                if self._try_clear(node, w, pass_i_r):
                    self.tree.add(w, node)
                    stack.append((w, iter(neighbors(w, self.g))))
                    advanced = True
                    break
                if w not in self._pending_cells:
                    self._pending_cells.add(w)
                    self.pending.append(
                        PendingColumn(w, node, self.h[w[0]][w[1]])
                    )
            if not advanced:
                stack.pop()

    def _try_clear(self, via: Pos, col: Pos, pass_i_r: int) -> bool:
        m = self.h[col[0]][col[1]]
        if self.ride is not None and self.ride.ramp.path[-1] == via:
            ext = self.ride.ramp.extended(col)
            if m <= ramp_capacities(ext).reach:
                self._adjust_and_absorb(self.ride, col, m)
                return True
        ramp = rft(self.tree, via, pass_i_r) if via != self.v0 else Ramp((self.v0,))
        if m > ramp_capacities(ramp.extended(col)).reach:
            return False
        self._drop_ride()
        self._clear_column(ramp, col, m)
        return True

    def _clear_column(self, ramp: Ramp, col: Pos, m: int) -> None:
        run = RampRun(ramp, self.g, self.h, self.agent)
        self._adjust_and_absorb(run, col, m)

    def _adjust_and_absorb(self, run: RampRun, col: Pos, m: int) -> None:
        """Set the ramp's reachable height to m - 1 and append the column;
        the extended ramp (column included) becomes the standing ride."""
        if run.reach() > m - 1:
            self.acts.extend(run.teardown_to_reach(m - 1))
        elif run.reach() < m - 1:
            self.acts.extend(run.build_to_reach(m - 1))
        ext = run.ramp.extended(col)
        self.ride = RampRun(ext, self.g, self.h, self.agent)

    def _drop_ride(self) -> None:
        if self.ride is not None:
            self.acts.extend(self.ride.teardown())
            self.ride = None


def simple_deconstruct_dfs(grid: GridSpec, heights, area: set[Pos], v0: Pos,
                           agent: int = 0) -> PassResult:
    """Depth-first sweep clearing every column a simple ramp over the tree
    path can reach; taller columns are recorded as pending."""
    p = _AreaPlanner(grid, heights, area, v0, 0, agent)
    p._explore(v0, pass_i_r=0)
    p._drop_ride()
    return PassResult(p.tree, p.acts, p.pending)


def deconstruct_dfs(grid: GridSpec, heights, area: set[Pos], tree: SpanTree,
                    pending: PendingColumn, i_r: int,
                    agent: int = 0) -> tuple[SpanTree, list[Action]]:
    """Clear one recorded column with a compound ramp over the tree and
    sweep the newly reachable cells behind it.

    Raises RampError('infeasible') when no tree neighbor yields a ramp
    tall enough; the column then simply stays pending.
    """
    from .ramps import RampError

    p = _AreaPlanner(grid, heights, area, tree.root, i_r, agent)
    p.tree = tree
    if not p.clear_pending(pending):
        raise RampError("infeasible", f"column at {pending.column} out of reach")
    return tree, p.acts


def single_agent_reramp(grid: GridSpec, heights, area: set[Pos], v0: Pos,
                        i_r: int, agent: int = 0) -> list[Action]:
    """One full pass of the single-agent planner: a simple sweep, then a
    compound-ramp attempt on every pending column (expanding the sweep
    behind each cleared one).  Mutates heights; returns the deconstruction
    actions."""
    return _AreaPlanner(grid, heights, area, v0, i_r, agent).run().actions


def plan_area_until_frozen(grid: GridSpec, heights, area: set[Pos], v0: Pos,
                           i_r: int, agent: int = 0,
                           max_rounds: int | None = None) -> list[Action]:
    """Repeat single-agent passes until the area's structure stops changing."""
    out: list[Action] = []
    rounds = max_rounds if max_rounds is not None else len(area) + 1
    for _ in range(rounds):
        snap = [heights[c[0]][c[1]] for c in sorted(area)]
        out.extend(single_agent_reramp(grid, heights, area, v0, i_r, agent))
        if [heights[c[0]][c[1]] for c in sorted(area)] == snap:
            break
    return out


# --- multi-agent -------------------------------------------------------------

@dataclass(frozen=True)
class AreaAssignment:
    """Interior cells labeled by the border cell (index) that claims them."""

    by_cell: dict[Pos, int]
    border: tuple[Pos, ...]

    def cells_of(self, bid: int) -> set[Pos]:
        return {c for c, b in self.by_cell.items() if b == bid}


def decompose_by_border(inst: Instance) -> AreaAssignment:
    """Label every interior cell with its closest border cell.

    Multi-source BFS over the footprint; distance ties go to the smaller
    border index in row-major order, so the split is deterministic and
    each area is connected to its border cell.
    """
    g = inst.grid
    border = border_cells(g)
    label: dict[Pos, int] = {}
    queue: list[Pos] = []
    for bid, b in enumerate(border):
        for q in neighbors(b, g):
            if g.is_interior(q) and q not in label:
                label[q] = bid
                queue.append(q)
    qi = 0
    while qi < len(queue):
        cur = queue[qi]
        qi += 1
        for q in neighbors(cur, g):
            if g.is_interior(q) and q not in label:
                label[q] = label[cur]
                queue.append(q)
    return AreaAssignment(label, tuple(border))


@dataclass
class PlanResult:
    """Planner output: the construction plan plus diagnostics."""

    plan: MultiPlan
    macd_plan: MultiPlan
    complete: bool
    leftover: tuple[tuple[int, ...], ...]  # heights never deconstructed
    i_r: int


def _chunks_to_plans(chunks: dict[int, list[tuple[int, list[Action]]]]) -> MultiPlan:
    plans = []
    for agent in sorted(chunks):
        parts = sorted(chunks[agent])
        actions: list[Action] = []
        start = parts[0][0]
        t = start
        for at, acts in parts:
            if at < t:
                raise ValueError("overlapping plan chunks")
            actions.extend(offgrid_wait(agent) for _ in range(at - t))
            actions.extend(acts)
            t = at + len(acts)
        plans.append(AgentPlan(agent, start, tuple(actions)))
    return MultiPlan(tuple(plans))


def _resolve_conflicts(plans: list[AgentPlan]) -> list[AgentPlan]:
    """Delay higher-numbered agents one step at a time until no two
    exclusion zones intersect in any timestep (area disjointness makes
    this a no-op in practice)."""
    plans = list(plans)
    guard = sum(len(p.actions) for p in plans) + 1
    for _ in range(guard):
        zones: dict[tuple[int, Pos], int] = {}
        clash = None
        for p in plans:
            for i, a in enumerate(p.actions):
                if a.is_offgrid_noop():
                    continue
                t = p.start_t + i
                for c in exclusion_zone(a):
                    other = zones.get((t, c))
                    if other is not None and other != p.agent:
                        clash = max(other, p.agent)
                        break
                    zones[(t, c)] = p.agent
                if clash is not None:
                    break
            if clash is not None:
                break
        if clash is None:
            return plans
        plans = [
            AgentPlan(p.agent, p.start_t + 1, p.actions) if p.agent == clash else p
            for p in plans
        ]
    raise RuntimeError("conflict resolution did not converge")


def _last_change_offset(actions: list[Action]) -> int:
    for i in range(len(actions) - 1, -1, -1):
        if actions[i].kind in ("D", "P"):
            return i + 1
    return 0


def multi_agent_reramp(inst: Instance, i_r: int = 1) -> PlanResult:
    """Plan construction of the target with one agent per border area.

    Areas are deconstructed independently (concurrent phase), then merged
    pairwise (earliest-frozen neighboring areas first, the earlier agent
    surviving) with each merge phase scheduled after all previous work.
    Reversing the deconstruction timeline yields the construction plan.
    """
    g = inst.grid
    heights = [list(col) for col in inst.target]
    assign = decompose_by_border(inst)
    areas: dict[int, set[Pos]] = {}
    for c, bid in assign.by_cell.items():
        areas.setdefault(bid, set()).add(c)

    chunks: dict[int, list[tuple[int, list[Action]]]] = {}
    frozen_at: dict[int, int] = {}
    horizon = 0
    for bid in sorted(areas):
        acts = plan_area_until_frozen(g, heights, areas[bid], assign.border[bid],
                                      i_r, agent=bid)
        if acts:
            chunks.setdefault(bid, []).append((0, acts))
            horizon = max(horizon, len(acts))
        frozen_at[bid] = _last_change_offset(acts)

    alive = sorted(areas)
    while len(alive) > 1:
        order = sorted(alive, key=lambda b: (frozen_at[b], b))
        pair = None
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                if _areas_touch(areas[order[i]], areas[order[j]], g):
                    pair = (order[i], order[j])
                    break
            if pair:
                break
        if pair is None:
            raise RuntimeError("disconnected area graph")
        keep, gone = pair
        areas[keep] |= areas.pop(gone)
        alive.remove(gone)
        acts = plan_area_until_frozen(g, heights, areas[keep], assign.border[keep],
                                      i_r, agent=keep)
        if acts:
            chunks.setdefault(keep, []).append((horizon, acts))
            frozen_at[keep] = horizon + _last_change_offset(acts)
            horizon += len(acts)
        else:
            frozen_at[keep] = max(frozen_at[keep], frozen_at.get(gone, 0))

    # Final cleanup: a merge survivor whose own access point is walled off
    # by tall columns would strand work the single-agent planner could do,
    # so the last agent sweeps the remaining structure from every border
    # cell until a full round makes no progress.
    survivor = alive[0]
    all_cells = set(assign.by_cell)
    def _blocks() -> int:
        return sum(heights[x][y] for x in range(g.x_size) for y in range(g.y_size))
    while _blocks():
        before = _blocks()
        for bid, b in enumerate(assign.border):
            if not any(g.is_interior(q) for q in neighbors(b, g)):
                continue
            acts = plan_area_until_frozen(g, heights, all_cells, b, i_r,
                                          agent=survivor)
            if acts:
                chunks.setdefault(survivor, []).append((horizon, acts))
                frozen_at[survivor] = horizon + _last_change_offset(acts)
                horizon += len(acts)
        if _blocks() == before:
            break

    complete = all(heights[x][y] == 0 for x in range(g.x_size) for y in range(g.y_size))

    # dense agent ids in border order
    remap = {bid: k for k, bid in enumerate(sorted(chunks))}
    dense: dict[int, list[tuple[int, list[Action]]]] = {}
    for bid, parts in chunks.items():
        aid = remap[bid]
        dense[aid] = [
            (at, [a._replace(agent=aid) for a in acts]) for at, acts in parts
        ]
    macd = _chunks_to_plans(dense)
    macd = MultiPlan(tuple(_resolve_conflicts(list(macd.plans))))
    plan = reverse_plan(macd)
    return PlanResult(plan, macd, complete,
                      tuple(tuple(col) for col in heights), i_r)


def plan_single(inst: Instance, v0: Pos | None = None, i_r: int = 1) -> PlanResult:
    """Single-agent planning over the whole interior from one access point."""
    g = inst.grid
    heights = [list(col) for col in inst.target]
    if v0 is None:
        v0 = next(b for b in border_cells(g)
                  if any(g.is_interior(q) for q in neighbors(b, g)))
    area = {(x, y) for x in range(1, g.x_size - 1) for y in range(1, g.y_size - 1)}
    acts = plan_area_until_frozen(g, heights, area, v0, i_r, agent=0)
    chunks = {0: [(0, acts)]} if acts else {}
    macd = _chunks_to_plans(chunks) if chunks else MultiPlan(())
    complete = all(heights[x][y] == 0 for x in range(g.x_size) for y in range(g.y_size))
    return PlanResult(reverse_plan(macd), macd, complete,
                      tuple(tuple(col) for col in heights), i_r)


def _areas_touch(a: set[Pos], b: set[Pos], g: GridSpec) -> bool:
    small, big = (a, b) if len(a) <= len(b) else (b, a)
    for c in small:
        for q in neighbors(c, g):
            if q in big:
                return True
    return False
