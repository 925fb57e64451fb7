from dataclasses import replace

import pytest

from ftsafra.core import BasicMessage, FtToken
from ftsafra.fixtures import builtin
from ftsafra.scenario import Runner, Scenario, resolve, run_scenario
from ftsafra.sim import CRASH, DELIVER, FD, PASSIVE, SEND, DisabledTransition, Model, Transition, World


def prefix(name, steps):
    """Runner positioned after the first ``steps`` scripted transitions of a fixture."""
    sc = builtin(name)
    r = Runner(sc.model())
    for k, d in enumerate(sc.transitions[:steps], start=1):
        r.step(resolve(r.world, r.state, d, k))
    return r


def kinds(ts):
    return {(t.kind, t.actor, t.target, type(t.payload).__name__) for t in ts}


def test_model_validation():
    with pytest.raises(ValueError):
        Model("classic", 1)
    with pytest.raises(ValueError):
        Model("classic", 3, max_crashes=1)
    with pytest.raises(ValueError):
        Model("ft", 3, max_crashes=4)
    with pytest.raises(ValueError):
        Model("ft", 3, s_cap=0)
    with pytest.raises(ValueError):
        Model("other", 3)
    with pytest.raises(ValueError):
        Model("ft", 3, initial_active=(3,))


def test_quiescent_state_only_allows_crashes():
    w = World(Model("ft", 3, max_crashes=1, initial_active=()))
    g, _ = w.initial()
    g = replace(g, tokens=((),) * 9)
    assert all(t.kind == CRASH for t in w.enabled(g))
    assert [t.actor for t in w.enabled(g)] == [0, 1, 2]


def test_initial_state_all_active():
    w = World(Model("classic", 2, m_cap=1))
    g, st = w.initial()
    assert st.token_sends == 0
    assert kinds(w.enabled(g)) == {
        (SEND, 0, 1, "NoneType"), (SEND, 1, 0, "NoneType"),
        (PASSIVE, 0, None, "NoneType"), (PASSIVE, 1, None, "NoneType"),
    }


def test_no_sends_once_budget_is_spent():
    w = World(Model("classic", 2, m_cap=1))
    g, _ = w.initial()
    g = w.apply(g, Transition(SEND, 0, 1)).state
    assert g.messages_remaining == 0
    assert not any(t.kind == SEND for t in w.enabled(g))


def test_enabled_after_initiator_crash():
    r = prefix("example2-fig2", 8)
    g = r.state
    assert g.nodes[0] is None
    assert g.fd_pending == {(1, 0), (2, 0)}
    got = kinds(r.world.enabled(g))
    for want in [
        (DELIVER, 1, 0, "BasicMessage"),
        (DELIVER, 2, 1, "BasicMessage"),
        (DELIVER, 1, 2, "BasicMessage"),
        (DELIVER, 1, 0, "FtToken"),
        (FD, 1, 0, "NoneType"),
        (FD, 2, 0, "NoneType"),
    ]:
        assert want in got
    assert not any(t[1] == 0 and t[0] != DELIVER for t in got)
    # m and m' carry the same sender and seq, so they are one branching choice
    assert g.in_flight(0, 1) == 2


def test_crash_purges_inbound_channels():
    r = prefix("example2-fig2", 7)
    w, g = r.world, r.state
    assert g.in_flight(2, 1) == 1
    g2 = w.apply(g, Transition(CRASH, 1)).state
    assert g2.in_flight(2, 1) == 0 and g2.in_flight(0, 1) == 0
    assert not g2.tokens[0 * 3 + 1]
    assert g2.in_flight(1, 2) == 1  # messages sent by the crashed node survive
    assert g2.fd_pending == {(0, 1), (2, 1)}


def test_fd_sends_backup_token_to_new_successor():
    r = prefix("example2-fig2", 8)
    st = r.world.apply(r.state, Transition(FD, 2, 0))
    assert st.backup_sends == 1
    assert st.state.tokens[2 * 3 + 1] == (FtToken((0, 0, 0), 2, 1, frozenset({0})),)
    assert (2, 0) not in st.state.fd_pending


def test_message_from_known_crashed_sender_is_discarded():
    r = prefix("example2-fig2", 20)
    w, g = r.world, r.state
    assert 0 in g.nodes[1].crashed_set
    st = w.apply(g, Transition(DELIVER, 1, 0, BasicMessage(0, 0)))
    assert st.state.nodes == g.nodes
    assert st.state.in_flight(0, 1) == 0
    assert st.activated is None


def test_terminated_predicate():
    w = World(Model("ft", 3, initial_active=()))
    g, _ = w.initial()
    assert w.terminated(g)
    # m' from the crashed initiator is in flight but node 1 already knows
    r = prefix("example2-fig2", 19)
    assert r.world.terminated(r.state)
    assert r.state.in_flight(0, 1) == 1
    # the flawed run: 1 is only in Report_0 when node 0 announces
    r = prefix("kff21-bug-n2", 5)
    s0 = r.state.nodes[0]
    assert 1 in s0.report_set and 1 not in s0.crashed_set
    assert not r.world.terminated(r.state)


def test_classic_terminated_needs_empty_channels():
    w = World(Model("classic", 2, initial_active=(1,)))
    g, _ = w.initial()
    g = w.apply(g, Transition(SEND, 1, 0)).state
    g = w.apply(g, Transition(PASSIVE, 1)).state
    assert not w.terminated(g)


def test_after_announce_only_basic_messages_drain():
    r = prefix("example2-fig2", 20)
    assert r.state.announced_by == 2
    en = r.world.enabled(r.state)
    assert [(t.kind, t.actor, t.target) for t in en] == [(DELIVER, 1, 0)]
    g = r.world.apply(r.state, en[0]).state
    assert r.world.enabled(g) == []


def test_disabled_transitions_are_rejected():
    w = World(Model("ft", 2, max_crashes=1))
    g, _ = w.initial()
    with pytest.raises(DisabledTransition):
        w.apply(g, Transition(FD, 0, 1))
    g = w.apply(g, Transition(CRASH, 1)).state
    with pytest.raises(DisabledTransition):
        w.apply(g, Transition(CRASH, 0))
    with pytest.raises(DisabledTransition):
        w.apply(g, Transition(SEND, 1, 0))


def test_round_cap_gates_token_moves_until_termination():
    w = World(Model("classic", 2, m_cap=4, s_cap=1, initial_active=(1,)))
    g, _ = w.initial()
    # node 0 starts passive and already sent the first token
    assert g.tokens[0 * 2 + 1]
    g = w.apply(g, Transition(SEND, 1, 0)).state
    g = w.apply(g, Transition(PASSIVE, 1)).state
    tok = w.enabled(g)
    g = w.apply(g, [t for t in tok if t.kind == DELIVER and t.actor == 1][0]).state
    assert g.rounds_used == 1
    # node 0 holds an undelivered message: not terminated, so token to 0 waits
    assert w.enabled(g) == [Transition(DELIVER, 0, 1, BasicMessage(1, 0))]


def test_invariants_hold_along_example_runs():
    for name in ("example1-fig1", "example2-fig2"):
        sc = builtin(name)
        r = Runner(sc.model())
        for k, d in enumerate(sc.transitions, start=1):
            r.step(resolve(r.world, r.state, d, k))
            assert r.world.check_invariants(r.state) == []


def test_invariant_checker_sees_broken_counters():
    r = prefix("example1-fig1", 1)
    g = r.state
    bad = replace(g.nodes[2], count_i=5)
    g = replace(g, nodes=g.nodes[:2] + (bad,))
    assert "counter-conservation" in {p for p, _ in r.world.check_invariants(g)}


def test_digest_is_canonical():
    w = World(Model("ft", 3, max_crashes=1))
    g, _ = w.initial()
    a = w.apply(w.apply(g, Transition(SEND, 1, 2)).state, Transition(SEND, 2, 1)).state
    b = w.apply(w.apply(g, Transition(SEND, 2, 1)).state, Transition(SEND, 1, 2)).state
    assert a == b and w.digest(a) == w.digest(b)
    assert w.digest(a) != w.digest(g)


def test_out_of_order_crash_notices_cost_an_extra_backup():
    # node 2 hears about 3 before 0: its new successor is the already-dead 0,
    # so one backup is lost and a second follows once 0's crash is known
    script = [
        {"kind": "send", "node": 0, "dest": 2},
        {"kind": "passive", "node": 3},
        {"kind": "crash", "node": 0},
        {"kind": "fd", "observer": 3, "subject": 0},
        {"kind": "crash", "node": 3},
        {"kind": "passive", "node": 1},
        {"kind": "deliver", "dst": 2, "src": 0, "payload": {"type": "basic"}},
        {"kind": "fd", "observer": 2, "subject": 3},
        {"kind": "deliver", "dst": 1, "src": 3, "payload": {"type": "token"}},
        {"kind": "fd", "observer": 2, "subject": 0},
    ]
    tr = run_scenario(Scenario("ft", 4, "fixed", 1, 2, transitions=script, max_crashes=2))
    backups = [e for e in tr.events() if e.startswith("backup-send")]
    assert backups == ["backup-send 3->1", "backup-send 2->0 lost", "backup-send 2->1"]
    assert tr.stats["crashes"] == 2
    assert tr.violations == []
