"""Synchronous-step simulator and plan checker.

Enforces the full action semantics: per-action preconditions, vertex
occupancy, pairwise-disjoint exclusion zones, the support rule, and the
no-blocks-on-border rule, in that fixed order so violation reports are
deterministic.  Also computes makespan/sum-of-costs metrics and converts
deconstruction plans into construction plans by time reversal.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, Sequence

from .core import (
    OFF_GRID,
    ENTER,
    LEAVE,
    DELIVER,
    PICKUP,
    MOVE,
    WAIT,
    Action,
    AgentState,
    GridSpec,
    Instance,
    ModelError,
    Pos,
    WorldState,
    neighbors,
    offgrid_wait,
)

RULE_PRECONDITION = "precondition"
RULE_VERTEX = "vertex"
RULE_EXCLUSION = "exclusion"
RULE_SUPPORT = "support"
RULE_BORDER = "border-block"
RULE_TARGET = "target-mismatch"


@dataclass(frozen=True)
class Violation:
    timestep: int
    agents: tuple[int, ...]
    rule: str
    detail: str


@dataclass(frozen=True)
class ViolationReport:
    ok: bool
    first_violation: Violation | None = None

    def to_json_dict(self) -> dict:
        if self.ok:
            return {"ok": True}
        v = self.first_violation
        return {
            "ok": False,
            "timestep": v.timestep,
            "agents": list(v.agents),
            "rule": v.rule,
            "detail": v.detail,
        }


@dataclass(frozen=True)
class Metrics:
    makespan: int
    sum_of_costs: int
    robots: int


@dataclass(frozen=True)
class AgentPlan:
    """One agent's timestamped action sequence.

    Actions run on consecutive timesteps starting at start_t; gaps where
    the agent is off-grid are explicit off-grid waits.
    """

    agent: int
    start_t: int
    actions: tuple[Action, ...]

    def end_t(self) -> int:
        return self.start_t + len(self.actions)


@dataclass(frozen=True)
class MultiPlan:
    plans: tuple[AgentPlan, ...]

    def __post_init__(self) -> None:
        ids = [p.agent for p in self.plans]
        if len(ids) != len(set(ids)):
            raise ModelError("agent ids in a plan must be distinct")

    @property
    def horizon(self) -> int:
        return max((p.end_t() for p in self.plans), default=0)


def exclusion_zone(a: Action) -> frozenset[Pos]:
    """Inclusive cell set between action start and end; empty off-grid."""
    cells = [c for c in (a.frm, a.to) if c != OFF_GRID]
    return frozenset(cells)


def invert_action(a: Action) -> Action:
    """Inverse action with the carry flag of the inverse's start state."""
    if a.kind == ENTER:
        return Action(LEAVE, a.agent, a.to, OFF_GRID, a.carrying)
    if a.kind == LEAVE:
        return Action(ENTER, a.agent, OFF_GRID, a.frm, a.carrying)
    if a.kind == DELIVER:
        return Action(PICKUP, a.agent, a.frm, a.to, False)
    if a.kind == PICKUP:
        return Action(DELIVER, a.agent, a.frm, a.to, True)
    if a.kind == MOVE:
        return Action(MOVE, a.agent, a.to, a.frm, a.carrying)
    if a.kind == WAIT:
        return a
    raise ModelError(f"unknown action kind {a.kind!r}")


class _Sim:
    """Mutable simulation state shared by step() and validate_plan()."""

    def __init__(self, g: GridSpec, heights=None, agents=None):
        self.g = g
        if heights is None:
            self.h = [[0] * g.y_size for _ in range(g.x_size)]
        else:
            self.h = [list(col) for col in heights]
        self.agents: dict[int, list] = {}  # id -> [pos, carrying]
        if agents:
            for aid, st in agents.items():
                self.agents[aid] = [st.pos, st.carrying]

    def snapshot(self, t: int) -> WorldState:
        return WorldState(
            tuple(tuple(col) for col in self.h),
            {aid: AgentState(p, c) for aid, (p, c) in sorted(self.agents.items())},
            t,
        )

    def _pre(self, a: Action) -> str | None:
        """First failed precondition message, or None."""
        g, h = self.g, self.h
        st = self.agents.get(a.agent)
        on_grid = st is not None
        if a.kind == ENTER:
            if on_grid:
                return "enter by an agent already on the grid"
            if a.frm != OFF_GRID or a.to == OFF_GRID or not g.is_border(a.to):
                return "enter must come from off-grid onto a border cell"
            return None
        if not on_grid:
            if a.is_offgrid_noop():
                return None
            return "action by an off-grid agent"
        pos, carrying = st
        if a.kind != ENTER and a.frm != pos:
            return f"action 'from' {a.frm} does not match agent position {pos}"
        if a.carrying != carrying:
            return "action carry flag does not match agent state"
        if a.kind == LEAVE:
            if not g.is_border(pos):
                return "leave is only possible from a border cell"
            return None
        if a.kind == WAIT:
            return None
        if a.to == OFF_GRID or a.to not in neighbors(pos, g):
            return f"target {a.to} is not a neighbor of {pos}"
        zf = h[pos[0]][pos[1]]
        zt = h[a.to[0]][a.to[1]]
        if a.kind == MOVE:
            if abs(zf - zt) > 1:
                return f"move climbs {abs(zf - zt)} blocks"
            return None
        if a.kind == DELIVER:
            if not carrying:
                return "deliver without a carried block"
            if zf != zt:
                return f"deliver needs equal heights, got {zf} vs {zt}"
            if zt >= g.z_size:
                return "deliver would exceed the grid height"
            return None
        if a.kind == PICKUP:
            if carrying:
                return "pick up while already carrying"
            if zt < 1:
                return "pick up from an empty column"
            if zf != zt - 1:
                return f"pick up needs agent one below the column top, got {zf} vs {zt}"
            return None
        return f"unknown action kind {a.kind!r}"

    def step(self, batch: Sequence[Action], t: int) -> Violation | None:
        """Apply one synchronous timestep; mutates state unless violating."""
        by_agent: dict[int, Action] = {}
        for a in batch:
            if a.agent in by_agent:
                raise ModelError(f"two actions for agent {a.agent} in one step")
            by_agent[a.agent] = a
        # Agents given no action implicitly wait (still casting a zone).
        for aid, (pos, carrying) in self.agents.items():
            if aid not in by_agent:
                by_agent[aid] = Action(WAIT, aid, pos, pos, carrying)
        acts = [by_agent[aid] for aid in sorted(by_agent)]

        # (1) preconditions, lowest agent id first
        for a in acts:
            msg = self._pre(a)
            if msg is not None:
                return Violation(t, (a.agent,), RULE_PRECONDITION, f"{a.kind}: {msg}")

        # (2) vertex occupancy after the step: one object per cell
        end_pos: dict[Pos, int] = {}
        for a in acts:
            p = None
            if a.kind == ENTER:
                p = a.to
            elif a.kind in (MOVE,):
                p = a.to
            elif a.kind in (DELIVER, PICKUP, WAIT):
                p = a.frm if a.frm != OFF_GRID else None
            if p is None:
                continue
            if p in end_pos:
                return Violation(
                    t, (end_pos[p], a.agent), RULE_VERTEX, f"two agents end on {p}"
                )
            end_pos[p] = a.agent
        delivered: dict[Pos, int] = {}
        for a in acts:
            if a.kind == DELIVER:
                if a.to in delivered:
                    return Violation(
                        t, (delivered[a.to], a.agent), RULE_VERTEX,
                        f"two blocks delivered to {a.to}",
                    )
                delivered[a.to] = a.agent
                other = end_pos.get(a.to)
                if other is not None and by_agent[other].kind in (WAIT, DELIVER, PICKUP):
                    # The stationary agent occupies the very cell the block lands in.
                    return Violation(
                        t, (min(other, a.agent), max(other, a.agent)), RULE_VERTEX,
                        f"block delivered into occupied cell {a.to}",
                    )

        # (3) pairwise-empty exclusion zones
        zone_owner: dict[Pos, int] = {}
        for a in acts:
            for c in exclusion_zone(a):
                if c in zone_owner and zone_owner[c] != a.agent:
                    pair = (zone_owner[c], a.agent)
                    return Violation(
                        t, (min(pair), max(pair)), RULE_EXCLUSION,
                        f"exclusion zones intersect at {c}",
                    )
                zone_owner[c] = a.agent

        # (4) support: heights stay within bounds (stacking is structural
        # with a height map; this guards internal consistency)
        for a in acts:
            if a.kind == DELIVER and self.h[a.to[0]][a.to[1]] + 1 > self.g.z_size:
                return Violation(t, (a.agent,), RULE_SUPPORT, f"column {a.to} overflows")

        # (5) border cells never hold blocks
        for a in acts:
            if a.kind == DELIVER and self.g.is_border(a.to):
                return Violation(
                    t, (a.agent,), RULE_BORDER, f"block delivered to border cell {a.to}"
                )

        # apply
        for a in acts:
            if a.kind == ENTER:
                self.agents[a.agent] = [a.to, a.carrying]
            elif a.kind == LEAVE:
                del self.agents[a.agent]
            elif a.kind == MOVE:
                self.agents[a.agent][0] = a.to
            elif a.kind == DELIVER:
                self.h[a.to[0]][a.to[1]] += 1
                self.agents[a.agent][1] = False
            elif a.kind == PICKUP:
                self.h[a.to[0]][a.to[1]] -= 1
                self.agents[a.agent][1] = True
        return None


def step(w: WorldState, batch: Sequence[Action], g: GridSpec):
    """Apply one synchronous batch to a world.

    Returns the successor WorldState, or a ViolationReport naming the first
    rule broken (checked in the fixed rule order).
    """
    sim = _Sim(g, w.heights, w.agents)
    v = sim.step(batch, w.timestep)
    if v is not None:
        return ViolationReport(False, v)
    return sim.snapshot(w.timestep + 1)


def _batches(mp: MultiPlan) -> Iterator[tuple[int, list[Action]]]:
    T = mp.horizon
    for t in range(T):
        batch = []
        for p in mp.plans:
            i = t - p.start_t
            if 0 <= i < len(p.actions):
                a = p.actions[i]
                if not a.is_offgrid_noop():
                    batch.append(a)
        yield t, batch


def simulate(inst: Instance, mp: MultiPlan, deconstruct: bool = False):
    """Yield (t, world-before-step, batch, violation-or-None) per timestep.

    Stops after the first violation.  Initial world is empty for
    construction, or the finished target for deconstruction.
    """
    g = inst.grid
    sim = _Sim(g, inst.target if deconstruct else None)
    yield 0, sim.snapshot(0), None, None
    for t, batch in _batches(mp):
        v = sim.step(batch, t)
        yield t + 1, sim.snapshot(t + 1), batch, v
        if v is not None:
            return


def validate_plan(inst: Instance, mp: MultiPlan, deconstruct: bool = False):
    """Simulate a full plan; returns (ViolationReport, Metrics).

    ok requires every step to pass, the final heights to equal the goal
    (the target, or all-zero when deconstructing), and no agent left on
    the grid.  Metrics are computed for the simulated prefix regardless.
    """
    g = inst.grid
    sim = _Sim(g, inst.target if deconstruct else None)
    makespan = 0
    costs: dict[int, int] = {}
    violation = None
    for t, batch in _batches(mp):
        on_grid_before = set(sim.agents)
        v = sim.step(batch, t)
        if v is not None:
            violation = v
            break
        active_agents = on_grid_before | set(sim.agents)
        for a in batch:
            if not a.is_offgrid_noop():
                active_agents.add(a.agent)
        for aid in active_agents:
            costs[aid] = costs.get(aid, 0) + 1
        if active_agents:
            makespan = t + 1
    metrics = Metrics(makespan, sum(costs.values()), sum(1 for c in costs.values() if c))
    if violation is not None:
        return ViolationReport(False, violation), metrics
    if sim.agents:
        ids = tuple(sorted(sim.agents))
        return (
            ViolationReport(False, Violation(mp.horizon, ids, RULE_TARGET,
                                             "agents still on the grid at the end")),
            metrics,
        )
    goal = [[0] * g.y_size for _ in range(g.x_size)] if deconstruct else [list(c) for c in inst.target]
    if sim.h != goal:
        bad = next(
            (x, y)
            for x in range(g.x_size)
            for y in range(g.y_size)
            if sim.h[x][y] != goal[x][y]
        )
        return (
            ViolationReport(False, Violation(mp.horizon, (), RULE_TARGET,
                                             f"final height mismatch at {bad}")),
            metrics,
        )
    return ViolationReport(True), metrics


def invert_actions(actions: Sequence[Action]) -> list[Action]:
    """Reverse-and-invert a single-agent action run (deconstruct <-> build)."""
    return [invert_action(a) for a in reversed(actions)]


def reverse_plan(mp: MultiPlan) -> MultiPlan:
    """Time-reverse a plan, inverting every action.

    A valid deconstruction plan becomes a valid construction plan and vice
    versa.  Plans are padded with off-grid no-ops to the common horizon
    before reversal; the padding is stripped again from the result.
    """
    T = mp.horizon
    out = []
    for p in mp.plans:
        inv = invert_actions(p.actions)
        start = T - p.end_t()
        # strip leading/trailing off-grid no-ops, keeping interior ones
        lo, hi = 0, len(inv)
        while lo < hi and inv[lo].is_offgrid_noop():
            lo += 1
        while hi > lo and inv[hi - 1].is_offgrid_noop():
            hi -= 1
        out.append(AgentPlan(p.agent, start + lo, tuple(inv[lo:hi])))
    return MultiPlan(tuple(out))


# --- plan JSON wire format -------------------------------------------------

def _cell_to_json(c):
    return "off" if c == OFF_GRID else [c[0], c[1]]


def _cell_from_json(v):
    if v == "off":
        return OFF_GRID
    if isinstance(v, list) and len(v) == 2:
        return (int(v[0]), int(v[1]))
    raise ModelError(f"malformed plan cell {v!r}")


def plan_to_json_dict(mp: MultiPlan) -> dict:
    return {
        "agents": [
            {
                "id": p.agent,
                "start_t": p.start_t,
                "actions": [
                    {"k": a.kind, "from": _cell_to_json(a.frm), "to": _cell_to_json(a.to)}
                    for a in p.actions
                ],
            }
            for p in mp.plans
        ]
    }


def _infer_carry(agent: int, raw: list[tuple[str, object, object]]) -> list[Action]:
    """Rebuild carry flags from the action kinds.

    The wire format does not store carry state; within each on-grid trip it
    is determined by the first Deliver/PickUp (Deliver implies the agent
    entered carrying).  Trips with neither validate identically either way,
    so they default to empty-handed.
    """
    actions: list[Action] = []
    i = 0
    n = len(raw)
    while i < n:
        kind, frm, to = raw[i]
        if kind == WAIT and frm == OFF_GRID:
            actions.append(Action(WAIT, agent, OFF_GRID, OFF_GRID, False))
            i += 1
            continue
        # scan one trip: up to and including the next Leave
        j = i
        while j < n and raw[j][0] != LEAVE:
            j += 1
        trip = raw[i : j + 1 if j < n else j]
        carry = False
        for k, _, _ in trip:
            if k == DELIVER:
                carry = True
                break
            if k == PICKUP:
                carry = False
                break
        for k, f, t in trip:
            if k == DELIVER:
                actions.append(Action(k, agent, f, t, True))
                carry = False
            elif k == PICKUP:
                actions.append(Action(k, agent, f, t, False))
                carry = True
            else:
                actions.append(Action(k, agent, f, t, carry))
        i += len(trip)
    return actions


def plan_from_json_dict(data: dict) -> MultiPlan:
    try:
        agents = data["agents"]
    except (KeyError, TypeError) as exc:
        raise ModelError(f"malformed plan JSON: {exc}") from exc
    plans = []
    for entry in agents:
        try:
            aid = int(entry["id"])
            start_t = int(entry.get("start_t", 0))
            raw = [
                (str(a["k"]), _cell_from_json(a["from"]), _cell_from_json(a["to"]))
                for a in entry["actions"]
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise ModelError(f"malformed plan JSON: {exc}") from exc
        for k, _, _ in raw:
            if k not in ("E", "L", "D", "P", "M", "W"):
                raise ModelError(f"unknown action kind {k!r}")
        plans.append(AgentPlan(aid, start_t, tuple(_infer_carry(aid, raw))))
    return MultiPlan(tuple(plans))
