"""Agent model: state chart enforcement, cubicle allocation, and above all
equivalence with the discrete-event model."""

from dataclasses import replace

import pytest

from fitroom import abs as agents
from fitroom.abs import (
    AbsRun,
    CustomerAgent,
    Message,
    run_abs,
)
from fitroom.config import ScenarioConfig
from fitroom.des import run_des
from fitroom.engine import ArrivalProfile, DistributionSpec, ModelError
from fitroom.proactive import ProactivePolicy
from fitroom.stats import RunMetrics


def cfg_variants():
    """A spread of scenarios, each exercising a different code path."""
    base = ScenarioConfig(replications=1, master_seed=77)
    hot = replace(base, arrival=replace(base.arrival, scale=2.8561))
    return {
        "default": base,
        "hot": hot,
        "policy_off": replace(base, proactive=ProactivePolicy(enabled=False)),
        "polling": replace(
            base,
            proactive=ProactivePolicy(
                check_interval=DistributionSpec.deterministic(15.0)
            ),
        ),
        "infinite_patience": replace(hot, patience=None),
        "always_help": replace(base, help_probability=1.0),
        "never_help": replace(base, help_probability=0.0),
        "one_cubicle": replace(base, cubicles=1),
        "short_fuse": replace(hot, patience=DistributionSpec.deterministic(1.0)),
        "all_deterministic": replace(
            base,
            job1=DistributionSpec.deterministic(0.4),
            job2=DistributionSpec.deterministic(1.0),
            job3=DistributionSpec.deterministic(0.3),
            fitting=DistributionSpec.deterministic(7.0),
            help_fraction=DistributionSpec.deterministic(0.5),
            patience=DistributionSpec.deterministic(10.0),
            proactive=ProactivePolicy(
                revert_delay=DistributionSpec.deterministic(5.0)
            ),
        ),
    }


@pytest.mark.parametrize("name", sorted(cfg_variants()))
def test_two_models_tell_the_same_story(name):
    # the strongest claim in the package: with shared streams the two
    # formulations are indistinguishable event for event
    cfg = cfg_variants()[name]
    for rep in range(3):
        t_des, t_abs = [], []
        m_des = run_des(cfg, rep, trace=t_des)
        m_abs = run_abs(cfg, rep, trace=t_abs)
        assert m_des == m_abs, f"{name} rep {rep}: metrics diverge"
        assert t_des == t_abs, f"{name} rep {rep}: traces diverge"


def test_zero_arrivals_empty_run():
    cfg = ScenarioConfig(arrival=ArrivalProfile((0.0,) * 8), replications=1)
    assert run_abs(cfg, 0) == RunMetrics(0.0, 0.0, 0.0, 0, 0, 0)


def test_same_replication_is_bit_identical():
    cfg = ScenarioConfig(replications=1, master_seed=2)
    t1, t2 = [], []
    assert run_abs(cfg, 0, trace=t1) == run_abs(cfg, 0, trace=t2)
    assert t1 == t2
    assert run_abs(cfg, 0) != run_abs(cfg, 1)


# --- state chart ---------------------------------------------------------------


def fresh_model():
    return AbsRun(ScenarioConfig(replications=1), 0)


def test_illegal_transition_is_rejected():
    model = fresh_model()
    c = CustomerAgent(0, 0.0, model)
    with pytest.raises(ModelError):
        c._transition(agents.FITTING)  # cannot teleport past the queues
    c._transition(agents.WAITING_ENTRY)
    with pytest.raises(ModelError):
        c._transition(agents.SERVED_STATE)


def test_any_state_may_abort_to_not_served():
    model = fresh_model()
    c = CustomerAgent(0, 0.0, model)
    c._transition(agents.WAITING_ENTRY)
    c._transition(agents.NOT_SERVED)
    with pytest.raises(ModelError):
        c._transition(agents.WAITING_ENTRY)  # terminal means terminal


def test_serve_message_must_match_waiting_state():
    model = fresh_model()
    c = CustomerAgent(0, 0.0, model)
    c._transition(agents.WAITING_ENTRY)
    # serving job 3 to someone waiting for entry is a wiring bug
    with pytest.raises(ModelError):
        c.handle(agents.M_SERVE, agents.JOB3, 0.0)
    c.handle(agents.M_SERVE, agents.JOB1, 0.0)
    assert c.state == agents.IN_ENTRY_SERVICE


def test_unknown_message_kind_is_rejected():
    model = fresh_model()
    c = CustomerAgent(0, 0.0, model)
    with pytest.raises(ModelError):
        c.handle("gift_card", None, 0.0)


def test_stale_patience_timer_is_harmless():
    model = fresh_model()
    c = CustomerAgent(0, 0.0, model)
    c._transition(agents.WAITING_ENTRY)
    c.handle(agents.M_SERVE, agents.JOB1, 0.0)
    before = c.state
    c.patience_expired(5.0)  # fired after service began; must do nothing
    assert c.state == before and c.disposition == agents.IN_SYSTEM


# --- fitting room ----------------------------------------------------------------


def test_cubicles_grant_lowest_free_index():
    model = fresh_model()
    room = model.room
    cs = [CustomerAgent(i, 0.0, model) for i in range(3)]
    for c in cs:
        c._transition(agents.WAITING_ENTRY)
        c.handle(agents.M_SERVE, agents.JOB1, 0.0)

    room.handle(agents.M_REQUEST_CUBICLE, cs[0], 0.0)
    room.handle(agents.M_REQUEST_CUBICLE, cs[1], 0.0)
    # grants travel by message; drain them
    deliveries = []
    while model.msgs:
        receiver, kind, payload = model.msgs.popleft()
        assert kind == agents.M_CUBICLE_GRANTED
        deliveries.append((receiver.id, payload))
    assert deliveries == [(0, 0), (1, 1)]

    # free the first cubicle, next grant must reuse index 0
    cs[0].cubicle = 0
    room.handle(agents.M_CUBICLE_RELEASED, cs[0], 1.0)
    room.handle(agents.M_REQUEST_CUBICLE, cs[2], 1.0)
    receiver, kind, payload = model.msgs.popleft()
    assert (receiver.id, payload) == (2, 0)
    assert room.occupied == 2


def test_grant_with_no_free_cubicle_is_a_model_error():
    model = AbsRun(ScenarioConfig(replications=1, cubicles=1), 0)
    a, b = CustomerAgent(0, 0.0, model), CustomerAgent(1, 0.0, model)
    model.room.handle(agents.M_REQUEST_CUBICLE, a, 0.0)
    with pytest.raises(ModelError):
        model.room.handle(agents.M_REQUEST_CUBICLE, b, 0.0)


def test_deliver_routes_an_explicit_message():
    model = fresh_model()
    c = CustomerAgent(0, 0.0, model)
    c._transition(agents.WAITING_ENTRY)
    model.deliver(Message(agents.M_SERVE, sender=None, receiver=c, payload=agents.JOB1))
    assert c.state == agents.IN_ENTRY_SERVICE


def test_state_names_cover_every_state():
    seen = set()
    for s, t in agents._EDGES:
        seen.add(s)
        seen.add(t)
    assert seen <= set(agents.STATE_NAMES)
