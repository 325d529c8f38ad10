"""Ramp construction machinery.

A simple ramp is a path from a border cell whose columns form a staircase;
blocks are placed layer by layer in L1 distance from the far end, lowest
level first, which a local rule reproduces: scan from the far end for two
successive columns of equal height and place on the one nearer the far end.

A compound ramp adds reversible side ramps.  A side ramp stores blocks on
the far half of its own path; relocating them one by one onto a stack at
its attachment node lets an agent climb past that node, gaining the side
ramp's reversible height.  The pivot split (a backward staircase of k
blocks height needs k(k+1)/2 blocks, which must fit on the forward part)
yields a reversible height of at least floor(n/2) for n path edges.

Every operation emits primitive actions legal under the simulator rules;
the emitter tracks a scratch world and asserts legality as it goes, and
each block arrival or removal is one full border round trip.
"""

from __future__ import annotations

from dataclasses import dataclass

from .core import (
    Action,
    GridSpec,
    Pos,
    deliver,
    enter,
    leave,
    move,
    pick_up,
)
from .validator import invert_actions


class RampError(Exception):
    """Ramp operation failure with a stable error code."""

    def __init__(self, code: str, msg: str = ""):
        super().__init__(f"{code}: {msg}" if msg else code)
        self.code = code


class EngineError(AssertionError):
    """Internal emitter inconsistency (a bug, not a user error)."""


def _tri(k: int) -> int:
    return k * (k + 1) // 2


def _adjacent(a: Pos, b: Pos) -> bool:
    return abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


# --- ramp shapes -------------------------------------------------------------

def _check_path(path: tuple[Pos, ...]) -> None:
    if not path:
        raise RampError("bad-params", "empty ramp path")
    if len(set(path)) != len(path):
        raise RampError("bad-params", "ramp path revisits a cell")
    for a, b in zip(path, path[1:]):
        if not _adjacent(a, b):
            raise RampError("bad-params", f"path cells {a} and {b} not adjacent")


@dataclass(frozen=True)
class SimpleRamp:
    """Path v0..vn; v0 is the border entry, v1..vn hold the staircase."""

    path: tuple[Pos, ...]

    def __post_init__(self) -> None:
        _check_path(self.path)

    @property
    def length(self) -> int:
        return len(self.path) - 1


@dataclass(frozen=True)
class Ramp:
    """Compound ramp: central path, side ramps, floor height.

    Side ramps attach by the first cell of their own path, which must be a
    non-root cell of this ramp's central path; footprints are disjoint
    apart from the attachment cells.
    """

    path: tuple[Pos, ...]
    sides: tuple["Ramp", ...] = ()
    floor: int = 0

    def __post_init__(self) -> None:
        _check_path(self.path)
        used = set(self.path)
        for s in self.sides:
            if s.path[0] not in self.path[1:]:
                raise RampError("bad-params", "side ramp must attach to a non-root path cell")
            sc = s.cells() - {s.path[0]}
            if sc & used:
                raise RampError("bad-params", "side ramp footprint overlaps the ramp")
            used |= sc

    @property
    def length(self) -> int:
        return len(self.path) - 1

    def cells(self) -> set[Pos]:
        out = set(self.path)
        for s in self.sides:
            out |= s.cells() - {s.path[0]}
        return out

    def sides_at(self, i: int) -> tuple["Ramp", ...]:
        p = self.path[i]
        return tuple(s for s in self.sides if s.path[0] == p)

    def extended(self, v_new: Pos) -> "Ramp":
        return Ramp(self.path + (v_new,), self.sides, self.floor)


@dataclass(frozen=True)
class RampProfile:
    """Full-state summary: per-node heights above floor and block counts."""

    node_heights: tuple[int, ...]
    capacity: int
    reversible_capacity: int
    reach: int  # top standing height including stacked side ramps at the end


_mrrh_cache: dict[Ramp, int] = {}


def max_reversible_height(r: Ramp) -> int:
    """Reversible height via the pivot split.

    The backward staircase of height k keeps k(k+1)/2 blocks, all of which
    must fit on the forward storage part (the path beyond the pivot with
    its side ramps); the largest feasible k is the answer.  A bare-vs-bare
    split already gives floor(n/2), so that is the guaranteed minimum.
    """
    got = _mrrh_cache.get(r)
    if got is not None:
        return got
    n = r.length
    out = 0
    for k in range(n, 0, -1):
        fwd_sides = tuple(s for s in r.sides if s.path[0] in r.path[k:])
        fwd_cap = _capacity(r.path[k:], fwd_sides)
        if _tri(k) <= fwd_cap:
            out = k
            break
    _mrrh_cache[r] = out
    return out


def _side_cell_count(r: Ramp) -> int:
    return (len(r.path) - 1) + sum(_side_cell_count(s) for s in r.sides)


def _capacity(path: tuple[Pos, ...], sides: tuple[Ramp, ...]) -> int:
    """Blocks held by the full state of a path with attached side ramps.

    Side ramps at the path root contribute storage but no profile step.
    """
    heights = [0]
    cap = 0
    for i in range(len(path) - 1):
        boost = 0
        if i > 0:
            boost = sum(max_reversible_height(s) for s in sides if s.path[0] == path[i])
        heights.append(heights[i] + 1 + boost)
        cap += heights[i + 1]
    for s in sides:
        i = path.index(s.path[0])
        stack = 0
        for sj in (x for x in sides if x.path[0] == path[i]):
            if sj is s:
                break
            stack += max_reversible_height(sj)
        plinth = heights[i] + stack
        cap += _tri(max_reversible_height(s)) + _side_cell_count(s) * plinth
    return cap


def ramp_capacities(r: Ramp) -> RampProfile:
    """Heights and block counts of the full ramp state.

    Consecutive full heights differ by one plus the reversible heights of
    the side ramps at the lower node; capacity counts central blocks, side
    stores, and the plinth layers that keep each side level with its
    attachment node.
    """
    heights = [0]
    for i in range(r.length):
        boost = sum(max_reversible_height(s) for s in r.sides_at(i)) if i > 0 else 0
        heights.append(heights[i] + 1 + boost)
    cap = _capacity(r.path, r.sides)
    reach = heights[-1] + sum(max_reversible_height(s) for s in r.sides_at(r.length))
    return RampProfile(tuple(heights), cap, _tri(max_reversible_height(r)), reach)


def ramp_debug_tree(r: Ramp, indent: int = 0) -> str:
    """Indented text dump of a ramp tree for golden tests."""
    pad = "  " * indent
    lines = [
        f"{pad}path={list(r.path)} floor={r.floor} "
        f"mrrh={max_reversible_height(r)} cap={ramp_capacities(r).capacity}"
    ]
    for s in r.sides:
        lines.append(ramp_debug_tree(s, indent + 1))
    return "\n".join(lines)


# --- simple-ramp strategies --------------------------------------------------

def _col(heights, p: Pos) -> int:
    return heights[p[0]][p[1]]


def flat_projection(r: SimpleRamp, heights) -> list[tuple[int, int]]:
    """Column heights indexed by path distance from the far end vn."""
    return [
        (dist, _col(heights, r.path[r.length - dist]))
        for dist in range(r.length)
    ]


def next_placement_simple(r: SimpleRamp, heights) -> Pos:
    """Next block position under the local 2-flat rule.

    Scanning from vn toward v0, the first two successive columns of equal
    height (zero counts) receive the block on the member nearer vn; with
    no such pair the fallback is vn.
    """
    n = r.length
    blocks = sum(_col(heights, r.path[i]) for i in range(1, n + 1))
    if blocks >= _tri(n):
        raise RampError("ramp-full", f"simple ramp of length {n} holds {blocks} blocks")
    for j in range(n, 0, -1):
        if _col(heights, r.path[j]) == _col(heights, r.path[j - 1]):
            return r.path[j]
    return r.path[n]


def next_removal_simple(r: SimpleRamp, heights) -> Pos:
    """Next block to remove: scan v0 upward for an equal non-zero pair and
    take its first member, else the top block at vn."""
    n = r.length
    blocks = sum(_col(heights, r.path[i]) for i in range(1, n + 1))
    if blocks <= 0:
        raise RampError("ramp-empty", "no blocks on the ramp")
    for i in range(n):
        zi = _col(heights, r.path[i])
        if 0 < zi == _col(heights, r.path[i + 1]):
            return r.path[i]
    return r.path[n]


def ramp_deliver_block(r: SimpleRamp, i: int, heights, agent: int = 0) -> list[Action]:
    """Round trip delivering one block onto vi: enter carrying, walk to
    v(i-1), deliver, walk back, leave.  2i + 1 actions."""
    n = r.length
    if not 1 <= i <= n:
        raise RampError("bad-params", f"node index {i} outside 1..{n}")
    lvl = [_col(heights, p) for p in r.path]
    for k in range(i - 1):
        if abs(lvl[k + 1] - lvl[k]) > 1:
            raise RampError("unreachable", f"move {r.path[k]}->{r.path[k + 1]} climbs too far")
    if lvl[i - 1] != lvl[i]:
        raise RampError("unreachable", f"cannot deliver at {r.path[i]} from height {lvl[i - 1]}")
    acts = [enter(agent, r.path[0], True)]
    for k in range(i - 1):
        acts.append(move(agent, r.path[k], r.path[k + 1], True))
    acts.append(deliver(agent, r.path[i - 1], r.path[i]))
    for k in range(i - 1, 0, -1):
        acts.append(move(agent, r.path[k], r.path[k - 1], False))
    acts.append(leave(agent, r.path[0], False))
    return acts


def ramp_pick_up_block(r: SimpleRamp, i: int, heights, agent: int = 0) -> list[Action]:
    """Mirror of ramp_deliver_block: enter empty, pick at vi, leave carrying."""
    n = r.length
    if not 1 <= i <= n:
        raise RampError("bad-params", f"node index {i} outside 1..{n}")
    lvl = [_col(heights, p) for p in r.path]
    if lvl[i] < 1:
        raise RampError("ramp-empty", f"no block to pick at {r.path[i]}")
    for k in range(i - 1):
        if abs(lvl[k + 1] - lvl[k]) > 1:
            raise RampError("unreachable", f"move {r.path[k]}->{r.path[k + 1]} climbs too far")
    if lvl[i - 1] != lvl[i] - 1:
        raise RampError("unreachable", f"cannot pick at {r.path[i]} from height {lvl[i - 1]}")
    acts = [enter(agent, r.path[0], False)]
    for k in range(i - 1):
        acts.append(move(agent, r.path[k], r.path[k + 1], False))
    acts.append(pick_up(agent, r.path[i - 1], r.path[i]))
    for k in range(i - 1, 0, -1):
        acts.append(move(agent, r.path[k], r.path[k - 1], True))
    acts.append(leave(agent, r.path[0], True))
    return acts


# --- ramp from tree ----------------------------------------------------------

def rft(tree, v_n: Pos, i_r: int) -> Ramp:
    """Build a compound ramp over a rooted spanning tree.

    The central path runs root -> v_n.  With recursion budget left, each
    branch off a non-root central node contributes a candidate side ramp
    toward the farthest node of the branch, kept when its reversible
    height is positive.  Children follow the fixed neighbor order.
    """
    if not tree.has_node(v_n):
        raise RampError("not-in-tree", f"{v_n} is not a tree node")
    return _rft_path(tree, tuple(tree.path_to(v_n)), i_r)


def _rft_path(tree, path: tuple[Pos, ...], i_r: int) -> Ramp:
    sides = []
    if i_r > 0:
        on_path = set(path)
        for i in range(1, len(path)):
            for child in tree.children_of(path[i]):
                if child in on_path:
                    continue
                far = tree.farthest_in_branch(child)
                branch = (path[i],) + tuple(tree.path_to(far)[tree.depth(path[i]) + 1:])
                side = _rft_path(tree, branch, i_r - 1)
                if max_reversible_height(side) > 0:
                    sides.append(side)
    return Ramp(tuple(path), tuple(sides), 0)


# --- the emitter -------------------------------------------------------------

class _Fill:
    """One placed block, shared by the store logs along its fill chain."""

    __slots__ = ("cell", "chain", "completed_layer")

    def __init__(self, cell: Pos, chain):
        self.cell = cell
        # chain: innermost-first tuple of ("store", run, rel_level) and
        # ("raise", run, abs_level) records
        self.chain = chain
        self.completed_layer = False


class _Run:
    """Runtime record for one (sub)ramp during a build."""

    __slots__ = ("ramp", "path", "mrrh", "store_cap", "floor", "stored",
                 "log", "raise_queue", "pile", "sides_by_idx", "parent",
                 "attach_idx")

    def __init__(self, ramp: Ramp, parent: "_Run | None"):
        self.ramp = ramp
        self.path = ramp.path
        self.mrrh = max_reversible_height(ramp)
        self.store_cap = _tri(self.mrrh)
        self.floor = 0
        self.stored = 0
        self.log: list[_Fill] = []
        self.raise_queue: list[tuple[Pos, int]] = []
        self.pile = 0
        self.parent = parent
        self.attach_idx = parent.path.index(ramp.path[0]) if parent else 0
        self.sides_by_idx: dict[int, list[_Run]] = {}

    @property
    def is_side(self) -> bool:
        return self.parent is not None

    @property
    def attach(self) -> Pos:
        return self.path[0]

    def rrh_now(self) -> int:
        p = 0
        while p < self.mrrh and _tri(p + 1) <= self.stored:
            p += 1
        return p

    def descendants(self):
        for recs in self.sides_by_idx.values():
            for s in recs:
                yield s
                yield from s.descendants()


class _Engine:
    """Replays the deterministic build of one ramp, emitting round trips.

    Each build event places exactly one block arriving through the border
    cell at the path root; trips are memoized so teardown and partial
    adjustment invert recorded trips.
    """

    def __init__(self, ramp: Ramp, grid: GridSpec, agent: int = 0):
        if not grid.is_border(ramp.path[0]):
            raise RampError("bad-params", "ramp must start at a border cell")
        for c in ramp.cells() - {ramp.path[0]}:
            if not grid.is_interior(c):
                raise RampError("bad-params", f"ramp cell {c} is not interior")
        self.ramp = ramp
        self.grid = grid
        self.agent = agent
        self.v0 = ramp.path[0]
        self.cells = ramp.cells()
        self.h: dict[Pos, int] = {c: 0 for c in self.cells}
        self.top = self._make_run(ramp, None)
        self._pred: dict[Pos, Pos] = {}
        for run in self._all_runs(self.top):
            for i in range(1, len(run.path)):
                self._pred[run.path[i]] = run.path[i - 1]
        self.trips: list[tuple[Action, ...]] = []
        self.targets: list[tuple[Pos, int]] = []
        self.reaches: list[int] = []

    def _make_run(self, ramp: Ramp, parent: _Run | None) -> _Run:
        run = _Run(ramp, parent)
        for i in range(1, len(ramp.path)):
            recs = [self._make_run(s, run) for s in ramp.sides_at(i)]
            if recs:
                run.sides_by_idx[i] = recs
        return run

    @staticmethod
    def _all_runs(top: _Run):
        yield top
        yield from top.descendants()

    # -- strategy -------------------------------------------------------------

    def _next_fill(self, run: _Run):
        """Next (cell, level, chain) for one arriving block, or None.

        Scans the central path backward for a 2-flat pair (lower node
        height plus the current reversible height of its side ramps equals
        the upper node height).  Blocks go first to the upper node's side
        ramps, last side first (expanding to reversible capacity, then
        raising the floor one full layer at a time), then onto the path.
        """
        if run.is_side and run.stored >= run.store_cap and not run.raise_queue:
            return None
        h = self.h
        t = None
        for i in range(len(run.path) - 2, -1, -1):
            zi = h[run.path[i]]
            rrh = sum(s.rrh_now() for s in run.sides_by_idx.get(i, ()))
            if zi + rrh == h[run.path[i + 1]]:
                t = i + 1
                break
        if t is None:
            return None
        for s in reversed(run.sides_by_idx.get(t, [])):
            if s.raise_queue:
                cell, lvl = s.raise_queue[0]
                return cell, lvl, (("raise", s, lvl),)
            if s.stored < s.store_cap:
                got = self._next_fill(s)
                if got is None:
                    raise EngineError("side below capacity yields no fill")
                cell, lvl, chain = got
                return cell, lvl, chain + (("store", s, lvl - s.floor),)
            if s.floor < self._floor_target(run, t, s):
                s.raise_queue = self._raise_layer(s)
                cell, lvl = s.raise_queue[0]
                return cell, lvl, (("raise", s, lvl),)
        cell = run.path[t]
        return cell, h[cell], ()

    def _floor_target(self, run: _Run, t: int, s: _Run) -> int:
        base = self.h[run.path[t]] + 1
        for other in run.sides_by_idx[t]:
            if other is s:
                return base
            base += other.mrrh
        raise EngineError("side not found at its own node")

    def _raise_layer(self, s: _Run) -> list[tuple[Pos, int]]:
        """One +1 layer over a side footprint: plinth cells far to near
        (standing on the next nearer cell), then store columns near to far
        (standing on the column just raised), then nested sides the same
        way."""
        order: list[tuple[Pos, int]] = []
        plinth = [p for p in s.path[1:] if self.h[p] == s.floor]
        store = [p for p in s.path[1:] if self.h[p] > s.floor]
        for p in reversed(plinth):
            order.append((p, self.h[p]))
        for p in store:
            order.append((p, self.h[p]))
        for recs in s.sides_by_idx.values():
            for sub in recs:
                order.extend(self._raise_layer(sub))
        if not order:
            raise EngineError("empty raise layer")
        return order

    def _apply_fill(self, fill: _Fill) -> None:
        """Bookkeeping for one placed block (heights already updated)."""
        for kind, run, _lvl in fill.chain:
            if kind == "store":
                run.stored += 1
                run.log.append(fill)
            else:  # raise
                got = run.raise_queue.pop(0)
                if got[0] != fill.cell:
                    raise EngineError("raise queue out of sync")
                if not run.raise_queue:
                    fill.completed_layer = True
                    run.floor += 1
                    for sub in run.descendants():
                        sub.floor += 1

    def _rewind_fill(self, fill: _Fill, upto: _Run) -> None:
        """Undo _apply_fill for chain elements at or below `upto`."""
        for kind, run, lvl in fill.chain:
            if kind == "store":
                if run.log[-1] is not fill:
                    raise EngineError("store log out of LIFO order")
                run.log.pop()
                run.stored -= 1
            else:
                if fill.completed_layer:
                    run.floor -= 1
                    for sub in run.descendants():
                        sub.floor -= 1
                run.raise_queue.insert(0, (fill.cell, lvl))
            if run is upto:
                return
        raise EngineError("rewind chain did not reach the piled side")

    def _replay_fill(self, fill: _Fill, upto: _Run) -> None:
        """Redo _apply_fill for chain elements at or below `upto`."""
        for kind, run, _lvl in fill.chain:
            if kind == "store":
                run.stored += 1
                run.log.append(fill)
            else:
                run.raise_queue.pop(0)
                if fill.completed_layer:
                    run.floor += 1
                    for sub in run.descendants():
                        sub.floor += 1
            if run is upto:
                return
        raise EngineError("replay chain did not reach the piled side")

    def _entry_level(self, fill: _Fill, upto: _Run) -> int:
        """Current absolute level of a logged block, floor-relative."""
        for kind, run, lvl in fill.chain:
            if kind == "store" and run is upto:
                return run.floor + lvl
        raise EngineError("fill does not belong to the side's store")

    # -- movement primitives ---------------------------------------------------

    def _walk(self, frm: Pos, to: Pos, carrying: bool, acts: list[Action]) -> Pos:
        """Append moves frm -> to over current heights (climb <= 1 each)."""
        if frm == to:
            return to
        h = self.h
        prev: dict[Pos, Pos] = {frm: frm}
        queue = [frm]
        qi = 0
        while qi < len(queue) and to not in prev:
            cur = queue[qi]
            qi += 1
            zc = h[cur]
            x, y = cur
            for nxt in ((x + 1, y), (x - 1, y), (x, y + 1), (x, y - 1)):
                if nxt not in prev and nxt in self.cells and abs(h[nxt] - zc) <= 1:
                    prev[nxt] = cur
                    queue.append(nxt)
        if to not in prev:
            raise EngineError(f"no walkable route {frm} -> {to}")
        rev = []
        cur = to
        while cur != frm:
            rev.append(cur)
            cur = prev[cur]
        pos = frm
        for nxt in reversed(rev):
            acts.append(move(self.agent, pos, nxt, carrying))
            pos = nxt
        return pos

    def _do_deliver(self, cell: Pos, lvl: int, pos: Pos, acts) -> Pos:
        stand = self._pred[cell]
        if self.h[stand] != lvl or self.h[cell] != lvl:
            raise EngineError(
                f"deliver {cell}@{lvl}: stand {stand} h={self.h[stand]} cell h={self.h[cell]}"
            )
        pos = self._walk(pos, stand, True, acts)
        acts.append(deliver(self.agent, stand, cell))
        self.h[cell] += 1
        return pos

    def _do_pick(self, cell: Pos, lvl: int, pos: Pos, acts) -> Pos:
        stand = self._pred[cell]
        if self.h[stand] != lvl or self.h[cell] != lvl + 1:
            raise EngineError(
                f"pick {cell}@{lvl}: stand {stand} h={self.h[stand]} cell h={self.h[cell]}"
            )
        pos = self._walk(pos, stand, False, acts)
        acts.append(pick_up(self.agent, stand, cell))
        self.h[cell] -= 1
        return pos

    def _pile_slots(self, s: _Run, p: int) -> list[tuple[Pos, int]]:
        """Stack placement order: diagonal layers ending at the attachment.

        The attachment column rises p blocks above its current top while
        the near path cells form the climbable staircase below it.
        """
        base = self.h[s.attach]
        out = []
        for d in range(p):
            for k in range(d, -1, -1):
                cell = s.path[k]
                lvl = (base + d - k) if k == 0 else (s.floor + d - k)
                out.append((cell, lvl))
        return out

    def _pile_stand(self, s: _Run, cell: Pos) -> Pos:
        if cell == s.attach:
            return s.path[1]
        return s.path[s.path.index(cell) + 1]

    def _pile_deliver(self, s: _Run, cell: Pos, lvl: int, pos: Pos, acts) -> Pos:
        stand = self._pile_stand(s, cell)
        if self.h[stand] != lvl or self.h[cell] != lvl:
            raise EngineError(f"pile deliver {cell}@{lvl} from {stand} h={self.h[stand]}")
        pos = self._walk(pos, stand, True, acts)
        acts.append(deliver(self.agent, stand, cell))
        self.h[cell] += 1
        return pos

    def _pile_pick(self, s: _Run, cell: Pos, lvl: int, pos: Pos, acts) -> Pos:
        stand = self._pile_stand(s, cell)
        if self.h[stand] != lvl or self.h[cell] != lvl + 1:
            raise EngineError(f"pile pick {cell}@{lvl} from {stand} h={self.h[stand]}")
        pos = self._walk(pos, stand, False, acts)
        acts.append(pick_up(self.agent, stand, cell))
        self.h[cell] -= 1
        return pos

    def _reverse_side(self, s: _Run, p: int, pos: Pos, carrying: bool, acts,
                      piled: list) -> Pos:
        """Relocate T(p) stored blocks onto the attachment stack.

        A carried block seeds the stack and the last stored block re-arms
        the carry, so through traffic keeps its cargo.
        """
        if s.pile:
            raise EngineError("side already reversed")
        if s.raise_queue:
            raise EngineError("cannot reverse a side mid floor-raise")
        if p == 0:
            return pos
        if _tri(p) > s.stored:
            raise EngineError(f"stack of {p} needs {_tri(p)} blocks, stored {s.stored}")
        popped: list[_Fill] = []
        slots = self._pile_slots(s, p)

        def unstore_one() -> Pos:
            fill = s.log[-1]
            lvl = self._entry_level(fill, s)
            out = self._do_pick(fill.cell, lvl, pos_box[0], acts)
            self._rewind_fill(fill, s)
            popped.append(fill)
            return out

        pos_box = [pos]
        for j, (cell, lvl) in enumerate(slots):
            if not (j == 0 and carrying):
                pos_box[0] = unstore_one()
            pos_box[0] = self._pile_deliver(s, cell, lvl, pos_box[0], acts)
        if carrying:
            pos_box[0] = unstore_one()
        s.pile = p
        piled.append((s, popped, slots))
        return pos_box[0]

    def _unreverse_side(self, s: _Run, popped: list[_Fill], slots, pos: Pos,
                        carrying: bool, acts) -> Pos:
        """Inverse of _reverse_side: restore the stored arrangement."""
        p = s.pile
        if p == 0:
            return pos
        restores = list(reversed(popped))
        ri = 0

        def restore_one() -> Pos:
            nonlocal ri
            fill = restores[ri]
            ri += 1
            # level after replaying bookkeeping below the pile boundary
            self._replay_fill(fill, s)
            lvl = self._entry_level(fill, s)
            out = self._do_deliver(fill.cell, lvl, pos_box[0], acts)
            return out

        pos_box = [pos]
        if carrying:
            pos_box[0] = restore_one()
        for j in range(len(slots) - 1, -1, -1):
            cell, lvl = slots[j]
            pos_box[0] = self._pile_pick(s, cell, lvl, pos_box[0], acts)
            if ri < len(restores):
                pos_box[0] = restore_one()
        if ri != len(restores):
            raise EngineError("pile restore left blocks unplaced")
        s.pile = 0
        return pos_box[0]

    def _virtual_stack(self, run: _Run, idx: int, need: int):
        """Reconstruct standing stacks at a node without emitting actions."""
        piled: list[tuple[_Run, list[_Fill]]] = []
        total = 0
        for s in run.sides_by_idx.get(idx, []):
            if total >= need:
                break
            p = min(s.rrh_now(), need - total)
            popped: list[_Fill] = []
            slots = self._pile_slots(s, p)
            for cell, _lvl in slots:
                fill = s.log[-1]
                self.h[fill.cell] -= 1
                self._rewind_fill(fill, s)
                popped.append(fill)
                self.h[cell] += 1
            s.pile = p
            piled.append((s, popped, slots))
            total += p
        if total < need:
            raise EngineError(f"standing stack of {need} not reconstructible")
        return piled

    # -- trip assembly ---------------------------------------------------------

    def _locate(self, cell: Pos) -> list[tuple[_Run, int]]:
        def rec(run: _Run):
            if cell in run.path:
                return [(run, run.path.index(cell))]
            for recs in run.sides_by_idx.values():
                for s in recs:
                    sub = rec(s)
                    if sub is not None:
                        return [(run, run.path.index(s.attach))] + sub
            return None

        got = rec(self.top)
        if got is None:
            raise EngineError(f"cell {cell} is not on the ramp")
        return got

    def _stack_at(self, run: _Run, idx: int, need: int, pos: Pos, carrying: bool,
                  acts, piled, before: "_Run | None" = None) -> Pos:
        """Stack side ramps at run.path[idx] until the column rises `need`
        blocks; earlier sides stack fully before later ones."""
        total = 0
        for s in run.sides_by_idx.get(idx, []):
            if s is before or total >= need:
                break
            p = min(s.rrh_now(), need - total)
            pos = self._reverse_side(s, p, pos, carrying, acts, piled)
            total += p
        if total < need:
            raise EngineError(f"sides at {run.path[idx]} stack {total} of {need}")
        return pos

    def _stack_for_step(self, run: _Run, idx: int, need: int, pos: Pos,
                        carrying: bool, acts, piled) -> Pos:
        """Raise run.path[idx] by `need` via side stacks.

        A side ramp's own first cell is its attachment on the parent path,
        so a climb out of index 0 stacks the parent's earlier sides there.
        """
        if idx == 0 and run.is_side:
            return self._stack_at(run.parent, run.attach_idx, need, pos, carrying,
                                  acts, piled, before=run)
        return self._stack_at(run, idx, need, pos, carrying, acts, piled)

    def _climb(self, run: _Run, start: int, stop: int, pos: Pos, carrying: bool,
               acts, piled) -> Pos:
        h = self.h
        for k in range(start, stop):
            gap = h[run.path[k + 1]] - h[run.path[k]]
            if gap > 1:
                pos = self._stack_for_step(run, k, gap - 1, pos, carrying, acts, piled)
            pos = self._walk(pos, run.path[k + 1], carrying, acts)
        return pos

    def _emit_trip(self, cell: Pos, lvl: int) -> tuple[Action, ...]:
        """One border round trip delivering a block to (cell, level)."""
        acts: list[Action] = [enter(self.agent, self.v0, True)]
        piled: list[tuple[_Run, list[_Fill]]] = []
        pos = self.v0
        chain = self._locate(cell)
        for d, (run, idx) in enumerate(chain):
            last = d == len(chain) - 1
            stop = idx - 1 if last else idx
            start = run.path.index(pos) if pos in run.path else 0
            pos = self._climb(run, start, max(stop, 0), pos, True, acts, piled)
        orun, oidx = chain[-1]
        stand = self._pred[cell]
        need = lvl - self.h[stand]
        if need > 0:
            pos = self._stack_for_step(orun, oidx - 1, need, pos, True, acts, piled)
        pos = self._do_deliver(cell, lvl, pos, acts)
        for s, popped, slots in reversed(piled):
            pos = self._unreverse_side(s, popped, slots, pos, False, acts)
        pos = self._walk(pos, self.v0, False, acts)
        acts.append(leave(self.agent, self.v0, False))
        return tuple(acts)

    # -- public ---------------------------------------------------------------

    @property
    def blocks(self) -> int:
        return len(self.trips)

    def reach(self) -> int:
        last = len(self.top.path) - 1
        return self.h[self.top.path[last]] + sum(
            s.rrh_now() for s in self.top.sides_by_idx.get(last, ())
        )

    def step_build(self) -> tuple[Action, ...] | None:
        """Generate and memoize the next build event's round trip."""
        got = self._next_fill(self.top)
        if got is None:
            return None
        cell, lvl, chain = got
        if self.h[cell] != lvl:
            raise EngineError(f"fill target {cell} expected level {lvl}, h={self.h[cell]}")
        trip = self._emit_trip(cell, lvl)
        if self.h[cell] != lvl + 1:
            raise EngineError("trip did not net one block at the target")
        self._apply_fill(_Fill(cell, chain))
        self.trips.append(trip)
        self.targets.append((cell, lvl))
        self.reaches.append(self.reach())
        return trip


class RampRun:
    """A ramp bound to a live world, supporting incremental build/teardown.

    The engine replays the deterministic build from empty up to the block
    count currently on the ramp footprint, asserting the world matches, so
    any consistent fill level can be resumed, extended, or torn down.
    """

    def __init__(self, ramp: Ramp, grid: GridSpec, world, agent: int = 0,
                 allow_stack_at: int | None = None):
        self.ramp = ramp
        self.grid = grid
        self.world = world
        self.eng = _Engine(ramp, grid, agent)
        self.standing: list = []
        current = sum(world[c[0]][c[1]] for c in self.eng.cells)
        for _ in range(current):
            if self.eng.step_build() is None:
                raise RampError("bad-params", "world holds more blocks than the ramp fits")
        if allow_stack_at is not None:
            node = ramp.path[allow_stack_at]
            need = world[node[0]][node[1]] - self.eng.h[node]
            if need > 0:
                self.standing = self.eng._virtual_stack(self.eng.top, allow_stack_at, need)
        for c in self.eng.cells:
            if self.eng.h[c] != world[c[0]][c[1]]:
                raise RampError(
                    "bad-params",
                    f"world does not match the ramp build state at {c}",
                )

    @property
    def fill(self) -> int:
        return self.eng.blocks

    def reach(self) -> int:
        return self.eng.reach()

    def reach_full(self) -> int:
        return ramp_capacities(self.ramp).reach

    def build_to_reach(self, stop: int) -> list[Action]:
        """Raise the ramp until its reachable top height first hits stop."""
        if stop > self.reach_full():
            raise RampError("unreachable-height", f"{stop} exceeds reach {self.reach_full()}")
        out: list[Action] = []
        while self.eng.reach() < stop:
            trip = self.eng.step_build()
            if trip is None:
                raise RampError("unreachable-height", f"ramp full below stop {stop}")
            cell, _ = self.eng.targets[-1]
            self.world[cell[0]][cell[1]] += 1
            out.extend(trip)
        return out

    def teardown_to(self, blocks: int) -> list[Action]:
        """Remove blocks (exact reverse of the build) down to a fill level."""
        out: list[Action] = []
        while self.eng.blocks > blocks:
            trip = self.eng.trips.pop()
            cell, _lvl = self.eng.targets.pop()
            self.eng.reaches.pop()
            out.extend(invert_actions(trip))
            self.world[cell[0]][cell[1]] -= 1
        if out:
            # rebuild strategy bookkeeping for the remaining prefix
            eng = _Engine(self.ramp, self.grid, self.eng.agent)
            for _ in range(self.eng.blocks):
                if eng.step_build() is None:
                    raise EngineError("teardown rewind lost events")
            self.eng = eng
        return out

    def teardown_to_reach(self, stop: int) -> list[Action]:
        """Remove blocks until the reachable top height first equals stop
        (the state the forward build would have paused at)."""
        if stop == 0:
            return self.teardown_to(0)
        for k, reach in enumerate(self.eng.reaches):
            if reach == stop:
                return self.teardown_to(k + 1)
        raise RampError("unreachable-height", f"no build prefix reaches {stop}")

    def teardown(self) -> list[Action]:
        return self.teardown_to(0)


def build_ramp(r: Ramp, world, grid: GridSpec, stop_height: int, agent: int = 0) -> list[Action]:
    """Raise a ramp from its current fill until its reachable top height
    (stacked end side ramps included) first reaches stop_height."""
    if stop_height <= 0:
        return []
    return RampRun(r, grid, world, agent).build_to_reach(stop_height)


def deconstruct_ramp(r: Ramp, world, grid: GridSpec, agent: int = 0) -> list[Action]:
    """Remove every block above the floor, in exact reverse build order."""
    return RampRun(r, grid, world, agent).teardown()


def add_edge(r: Ramp, v_new: Pos, m: int, world, grid: GridSpec, agent: int = 0) -> list[Action]:
    """Deconstruct the column of height m at v_new adjacent to the ramp end.

    Builds the ramp until its reachable height is m - 1, appends the column
    to the central path (its blocks then match the extended build state),
    and tears the extended ramp down to nothing.
    """
    if v_new in r.cells():
        raise RampError("bad-params", f"{v_new} is already on the ramp")
    if not _adjacent(v_new, r.path[-1]):
        raise RampError("bad-params", f"{v_new} is not adjacent to the ramp end")
    if world[v_new[0]][v_new[1]] != m:
        raise RampError("bad-params", f"column at {v_new} is not of height {m}")
    ext = r.extended(v_new)
    if m > ramp_capacities(ext).reach:
        raise RampError("too-tall", f"column of {m} exceeds the ramp's reach")
    run = RampRun(r, grid, world, agent)
    acts = run.build_to_reach(m - 1)
    ext_run = RampRun(ext, grid, world, agent)
    acts.extend(ext_run.teardown())
    return acts


def c_move(r: Ramp, world, grid: GridSpec, from_idx: int, to_idx: int,
           agent: int = 0, carrying: bool = False) -> list[Action]:
    """Expand one central-path step into side reversals plus the move.

    Moving up relocates the stored side-ramp blocks at the lower node onto
    its column and climbs over the stack (which is left standing, exactly
    as an agent mid-crossing leaves it); moving down across a standing
    stack climbs down and restores the stored arrangement.  World heights
    are updated in place.
    """
    n = r.length
    if not (0 <= from_idx <= n and 0 <= to_idx <= n and abs(to_idx - from_idx) == 1):
        raise RampError("invalid-step", f"indices {from_idx}->{to_idx}")
    acts: list[Action] = []
    if to_idx > from_idx:
        run = RampRun(r, grid, world, agent)
        eng = run.eng
        piled: list = []
        eng._climb(eng.top, from_idx, to_idx, r.path[from_idx], carrying, acts, piled)
    else:
        run = RampRun(r, grid, world, agent, allow_stack_at=to_idx)
        eng = run.eng
        pos = eng._walk(r.path[from_idx], r.path[to_idx], carrying, acts)
        for s, popped, slots in reversed(run.standing):
            pos = eng._unreverse_side(s, popped, slots, pos, carrying, acts)
    for c in eng.cells:
        world[c[0]][c[1]] = eng.h[c]
    return acts
