import json

import pytest

from reramp.core import (
    GridSpec,
    Instance,
    WorldState,
    deliver,
    enter,
    leave,
    move,
    pick_up,
    wait,
)
from reramp.validator import (
    AgentPlan,
    MultiPlan,
    ViolationReport,
    exclusion_zone,
    invert_action,
    invert_actions,
    plan_from_json_dict,
    plan_to_json_dict,
    reverse_plan,
    simulate,
    step,
    validate_plan,
)


def inst_with(cols, x=7, y=3, z=4):
    t = [[0] * y for _ in range(x)]
    for (cx, cy), h in cols.items():
        t[cx][cy] = h
    return Instance.from_heights(x, y, z, t)


def one_block_plan(agent=0):
    return [
        enter(agent, (0, 1), True),
        move(agent, (0, 1), (1, 1), True),
        deliver(agent, (1, 1), (2, 1)),
        move(agent, (1, 1), (0, 1), False),
        leave(agent, (0, 1), False),
    ]


# --- exclusion zones ---------------------------------------------------------

def test_zone_move():
    assert exclusion_zone(move(0, (2, 2), (2, 3), False)) == {(2, 2), (2, 3)}


def test_zone_wait():
    assert exclusion_zone(wait(0, (1, 1), False)) == {(1, 1)}


def test_zone_deliver():
    assert exclusion_zone(deliver(0, (2, 2), (3, 2))) == {(2, 2), (3, 2)}


def test_zone_enter_is_border_cell():
    assert exclusion_zone(enter(0, (0, 1), False)) == {(0, 1)}


# --- step --------------------------------------------------------------------

def test_step_swap_is_exclusion_violation():
    g = GridSpec(7, 7, 2)
    w = WorldState.empty(g)
    w = step(w, [enter(0, (2, 0), False)], g)
    w = step(w, [move(0, (2, 0), (2, 1), False), enter(1, (2, 2) if False else (0, 2), False)], g)
    # place two agents adjacent at (2,1) and (2,2)
    assert isinstance(w, WorldState)
    w = step(w, [move(1, (0, 2), (1, 2), False)], g)
    w = step(w, [move(1, (1, 2), (2, 2), False)], g)
    assert isinstance(w, WorldState)
    out = step(w, [move(0, (2, 1), (2, 2), False), move(1, (2, 2), (2, 1), False)], g)
    assert isinstance(out, ViolationReport)
    assert out.first_violation.rule == "exclusion"


def test_step_climb_two_is_precondition():
    g = GridSpec(5, 5, 3)
    t = [[0] * 5 for _ in range(5)]
    t[2][1] = 2
    w = WorldState(tuple(tuple(c) for c in t))
    w = step(w, [enter(0, (1, 0), False)], g)
    w = step(w, [move(0, (1, 0), (1, 1), False)], g)
    out = step(w, [move(0, (1, 1), (2, 1), False)], g)
    assert isinstance(out, ViolationReport)
    assert out.first_violation.rule == "precondition"


def test_step_enter_carrying():
    g = GridSpec(5, 5, 2)
    w = step(WorldState.empty(g), [enter(3, (0, 2), True)], g)
    assert isinstance(w, WorldState)
    assert w.agents[3].pos == (0, 2)
    assert w.agents[3].carrying


def test_step_deliver_to_border_flagged():
    g = GridSpec(5, 5, 2)
    w = step(WorldState.empty(g), [enter(0, (0, 1), True)], g)
    w = step(w, [move(0, (0, 1), (1, 1), True)], g)
    out = step(w, [deliver(0, (1, 1), (1, 0))], g)
    assert out.first_violation.rule == "border-block"


def test_step_two_deliveries_one_cell_is_vertex():
    g = GridSpec(5, 5, 2)
    w = WorldState.empty(g)
    w = step(w, [enter(0, (1, 0), True), enter(1, (3, 0), True)], g)
    w = step(w, [move(0, (1, 0), (1, 1), True), move(1, (3, 0), (3, 1), True)], g)
    assert isinstance(w, WorldState)
    out = step(w, [deliver(0, (1, 1), (2, 1)), deliver(1, (3, 1), (2, 1))], g)
    assert out.first_violation.rule == "vertex"


def test_step_implicit_wait_zone_blocks_delivery():
    g = GridSpec(5, 5, 2)
    w = WorldState.empty(g)
    w = step(w, [enter(0, (1, 0), True), enter(1, (2, 0), False)], g)
    w = step(w, [move(0, (1, 0), (1, 1), True), move(1, (2, 0), (2, 1), False)], g)
    # agent 1 gets no action (implicit wait) while agent 0 delivers onto it
    out = step(w, [deliver(0, (1, 1), (2, 1))], g)
    assert not out.ok
    assert out.first_violation.rule in ("vertex", "exclusion")


# --- validate_plan -----------------------------------------------------------

def test_validate_empty_plan_zero_target():
    inst = inst_with({})
    rep, met = validate_plan(inst, MultiPlan(()))
    assert rep.ok
    assert (met.makespan, met.sum_of_costs, met.robots) == (0, 0, 0)


def test_validate_five_action_build():
    inst = inst_with({(2, 1): 1})
    mp = MultiPlan((AgentPlan(0, 0, tuple(one_block_plan())),))
    rep, met = validate_plan(inst, mp)
    assert rep.ok, rep.first_violation
    assert met.makespan == 5
    assert met.sum_of_costs == 5
    assert met.robots == 1


def test_validate_target_mismatch():
    inst = inst_with({})
    mp = MultiPlan((AgentPlan(0, 0, tuple(one_block_plan())),))
    rep, _ = validate_plan(inst, mp)
    assert not rep.ok
    assert rep.first_violation.rule == "target-mismatch"


def test_validate_agent_left_on_grid():
    inst = inst_with({(2, 1): 1})
    mp = MultiPlan((AgentPlan(0, 0, tuple(one_block_plan()[:-1])),))
    rep, _ = validate_plan(inst, mp)
    assert not rep.ok
    assert rep.first_violation.rule == "target-mismatch"


def test_validate_is_deterministic():
    inst = inst_with({(2, 1): 1})
    mp = MultiPlan((AgentPlan(0, 0, tuple(one_block_plan())),))
    assert validate_plan(inst, mp) == validate_plan(inst, mp)


def test_metrics_respect_horizon():
    inst = inst_with({(2, 1): 1})
    mp = MultiPlan((AgentPlan(0, 3, tuple(one_block_plan())),))
    rep, met = validate_plan(inst, mp)
    assert rep.ok
    assert met.makespan == 8 <= mp.horizon
    assert met.sum_of_costs == 5


def test_conservation_invariant():
    inst = inst_with({(2, 1): 1, (3, 1): 2})
    from reramp.planner import multi_agent_reramp

    res = multi_agent_reramp(inst, i_r=0)
    assert res.complete
    entered = exited = 0
    prev_batch = None
    for t, world, batch, v in simulate(inst, res.plan):
        assert v is None
        if batch:
            for a in batch:
                if a.kind == "E" and a.carrying:
                    entered += 1
                if a.kind == "L" and a.carrying:
                    exited += 1
        on_grid = sum(sum(col) for col in world.heights)
        carried = sum(1 for st in world.agents.values() if st.carrying)
        assert on_grid + carried - entered + exited == 0


# --- inversion / reversal ----------------------------------------------------

def test_invert_deliver_pickup():
    a = deliver(0, (2, 2), (3, 2))
    b = invert_action(a)
    assert (b.kind, b.frm, b.to, b.carrying) == ("P", (2, 2), (3, 2), False)
    assert invert_action(b) == a


def test_invert_move_and_wait():
    m = move(0, (1, 1), (1, 2), True)
    assert invert_action(m) == move(0, (1, 2), (1, 1), True)
    w = wait(0, (1, 1), False)
    assert invert_action(w) == w


def test_invert_enter_leave():
    e = enter(0, (0, 1), True)
    l = invert_action(e)
    assert (l.kind, l.frm, l.carrying) == ("L", (0, 1), True)
    assert invert_action(l) == e


def test_reverse_plan_single_agent():
    # a deconstruction trip reversed becomes the build trip
    macd = [
        enter(0, (0, 1), False),
        move(0, (0, 1), (1, 1), False),
        pick_up(0, (1, 1), (2, 1)),
        move(0, (1, 1), (0, 1), True),
        leave(0, (0, 1), True),
    ]
    mp = MultiPlan((AgentPlan(0, 0, tuple(macd)),))
    rev = reverse_plan(mp)
    kinds = [a.kind for a in rev.plans[0].actions]
    assert kinds == ["E", "M", "D", "M", "L"]


def test_reverse_plan_involution():
    macd = [
        enter(0, (0, 1), False),
        pick_up(0, (0, 1), (1, 1)),
        leave(0, (0, 1), True),
    ]
    other = [
        enter(1, (2, 0), False),
        move(1, (2, 0), (2, 1), False),
        wait(1, (2, 1), False),
        move(1, (2, 1), (2, 0), False),
        leave(1, (2, 0), False),
    ]
    mp = MultiPlan((AgentPlan(0, 0, tuple(macd)), AgentPlan(1, 0, tuple(other))))
    assert reverse_plan(reverse_plan(mp)) == mp


def test_reverse_macd_validates_as_macc():
    inst = inst_with({(1, 1): 1})
    macd = [
        enter(0, (0, 1), False),
        pick_up(0, (0, 1), (1, 1)),
        leave(0, (0, 1), True),
    ]
    mp = MultiPlan((AgentPlan(0, 0, tuple(macd)),))
    rep, _ = validate_plan(inst, mp, deconstruct=True)
    assert rep.ok
    rep2, _ = validate_plan(inst, reverse_plan(mp))
    assert rep2.ok


def test_invert_actions_runs_backward():
    acts = one_block_plan()
    inv = invert_actions(acts)
    assert [a.kind for a in inv] == ["E", "M", "P", "M", "L"]


# --- plan JSON ---------------------------------------------------------------

def test_plan_json_roundtrip():
    mp = MultiPlan((AgentPlan(0, 2, tuple(one_block_plan())),))
    data = plan_to_json_dict(mp)
    text = json.dumps(data)
    again = plan_from_json_dict(json.loads(text))
    assert again == mp


def test_plan_json_carry_inference_pickup_trip():
    macd = [
        enter(4, (0, 1), False),
        pick_up(4, (0, 1), (1, 1)),
        leave(4, (0, 1), True),
    ]
    mp = MultiPlan((AgentPlan(4, 0, tuple(macd)),))
    again = plan_from_json_dict(plan_to_json_dict(mp))
    assert again == mp


def test_plan_json_rejects_garbage():
    from reramp.core import ModelError

    with pytest.raises(ModelError):
        plan_from_json_dict({"agents": [{"id": 0, "actions": [{"k": "X", "from": "off", "to": "off"}]}]})
