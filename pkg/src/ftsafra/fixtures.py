"""Built-in scripted scenarios: the two worked executions and the N=2 flaw."""

from __future__ import annotations

from .scenario import Scenario


def _send(i, j):
    return {"kind": "send", "node": i, "dest": j}


def _passive(i):
    return {"kind": "passive", "node": i}


def _resume(i):
    return {"kind": "resume", "node": i}


def _crash(i):
    return {"kind": "crash", "node": i}


def _fd(obs, subj):
    return {"kind": "fd", "observer": obs, "subject": subj}


def _basic(src, dst, seq):
    return {"kind": "deliver", "src": src, "dst": dst, "payload": {"type": "basic", "seq": seq}}


def _token(src, dst, **fields):
    return {"kind": "deliver", "src": src, "dst": dst, "payload": {"type": "token", **fields}}


def example1_fig1() -> Scenario:
    """Three-node crash-free run; node 1 announces."""
    return Scenario(
        name="example1-fig1",
        algorithm="classic",
        n=3,
        m_cap=2,
        s_cap=4,
        initial_active=[2],
        transitions=[
            _send(2, 1),      # m, seq 0
            _passive(2),
            _token(0, 1),
            _token(1, 2),
            _basic(2, 1, 0),  # m reaches node 1, count_1 = -1
            _send(1, 0),      # m', seq 1
            _basic(1, 0, 1),  # overtakes the token: black_0 = 1
            _passive(0),
            _token(2, 0, count=1, black=0),
            _passive(1),
            _token(0, 1),     # announce at node 1
        ],
    )


def example2_fig2() -> Scenario:
    """Three-node run where node 0 crashes after forwarding the first token."""
    return Scenario(
        name="example2-fig2",
        algorithm="ft",
        variant="fixed",
        n=3,
        m_cap=4,
        s_cap=4,
        max_crashes=1,
        transitions=[
            _send(0, 1),      # m
            _send(0, 1),      # m'
            _send(1, 2),      # m''
            _send(2, 1),      # m'''
            _passive(0),
            _passive(2),
            _resume(0),       # first token to node 1
            _crash(0),
            _fd(2, 0),        # backup token to node 1
            _basic(0, 1, 0),  # m
            _basic(2, 1, 0),  # m'''
            _token(2, 1, crashed=[0]),
            _passive(1),
            _resume(1),
            _token(0, 1, crashed=[]),  # original token, dismissed
            _token(1, 2, seq=1),
            _token(2, 1, seq=2),
            _basic(1, 2, 0),  # m''
            _passive(2),
            _token(1, 2, seq=2),  # announce at node 2
            _basic(0, 1, 0),  # m', ignored
        ],
    )


def kff21_bug_n2() -> Scenario:
    """Two nodes: node 1 sends and crashes, node 0 announces and is then reactivated."""
    return Scenario(
        name="kff21-bug-n2",
        algorithm="ft",
        variant="kff21-buggy",
        n=2,
        m_cap=1,
        s_cap=2,
        max_crashes=1,
        transitions=[
            _send(1, 0),
            _crash(1),
            _passive(0),
            _resume(0),
            _fd(0, 1),
            _basic(1, 0, 0),
        ],
    )


BUILTINS = {
    "example1-fig1": example1_fig1,
    "example2-fig2": example2_fig2,
    "kff21-bug-n2": kff21_bug_n2,
}


def builtin(name: str) -> Scenario:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise KeyError(f"unknown builtin scenario {name!r}; known: {', '.join(sorted(BUILTINS))}") from None
