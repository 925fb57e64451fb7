"""Failure-sensitive Safra with sequence numbers and a black boundary.

Handlers are pure: each takes a node state and returns the successor state
together with a :class:`~ftsafra.core.HandlerOutcome`. Waiting for passivity
is reified as a parked token that :func:`classic_resume` later completes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Optional

from .core import BasicMessage, ClassicToken, ContractViolation, HandlerOutcome, check_node, furthest


@dataclass(frozen=True)
class ClassicNodeState:
    id: int
    n: int
    count_i: int = 0
    black_i: int = 0
    seq_i: int = 0
    passive: bool = False
    parked_token: Optional[ClassicToken] = None

    @property
    def bootstrapping(self) -> bool:
        # node 0 waiting to emit the very first token; it cannot hold any
        # other token before having sent one, which bumps seq_0 to 1
        return self.id == 0 and self.seq_i == 0 and self.parked_token is not None

    def encode(self) -> tuple:
        t = self.parked_token
        return (
            1,
            self.count_i,
            self.black_i,
            self.seq_i,
            int(self.passive),
            -1 if t is None else 1,
            0 if t is None else t.count_t,
            0 if t is None else t.black_t,
        )


def classic_init(i: int, n: int, passive: bool = False) -> tuple[ClassicNodeState, HandlerOutcome]:
    if n < 2:
        raise ContractViolation("the classic variant needs a ring of at least two nodes")
    check_node(i, n)
    s = ClassicNodeState(id=i, n=n, black_i=i, passive=passive)
    if i != 0:
        return s, HandlerOutcome()
    s = replace(s, parked_token=ClassicToken(0, n - 1))
    if not passive:
        return s, HandlerOutcome(parked=True)
    return _emit_first_token(s)


def _emit_first_token(s: ClassicNodeState) -> tuple[ClassicNodeState, HandlerOutcome]:
    t = ClassicToken(s.count_i, s.n - 1)
    # black_0 is whitened like any forwarding node; a stale boundary here
    # costs an extra round after termination
    s = replace(s, count_i=0, black_i=0, seq_i=1, parked_token=None)
    return s, HandlerOutcome(sends=[(1 % s.n, t)])


def classic_send_basic(s: ClassicNodeState, dest: int, payload_id: str = "") -> tuple[ClassicNodeState, HandlerOutcome]:
    check_node(dest, s.n)
    if s.passive:
        raise ContractViolation(f"node {s.id} is passive and cannot send basic messages")
    if dest == s.id:
        raise ContractViolation("self-sends are not supported")
    m = BasicMessage(s.id, s.seq_i, payload_id)
    return replace(s, count_i=s.count_i + 1), HandlerOutcome(sends=[(dest, m)])


def classic_receive_basic(s: ClassicNodeState, m: BasicMessage) -> tuple[ClassicNodeState, HandlerOutcome]:
    black = s.black_i
    if m.seq_m == s.seq_i + 1 or (m.sender > s.id and m.seq_m == s.seq_i):
        black = furthest(s.id, black, m.sender)
    return replace(s, black_i=black, count_i=s.count_i - 1, passive=False), HandlerOutcome()


def classic_receive_token(s: ClassicNodeState, t: ClassicToken) -> tuple[ClassicNodeState, HandlerOutcome]:
    if s.parked_token is not None:
        raise ContractViolation(f"node {s.id} already holds a token")
    if not s.passive:
        return replace(s, parked_token=t), HandlerOutcome(parked=True)
    return _token_body(s, t)


def classic_resume(s: ClassicNodeState) -> tuple[ClassicNodeState, HandlerOutcome]:
    if s.parked_token is None:
        raise ContractViolation(f"node {s.id} has nothing parked")
    if not s.passive:
        raise ContractViolation(f"node {s.id} is still active")
    if s.bootstrapping:
        return _emit_first_token(s)
    t = s.parked_token
    return _token_body(replace(s, parked_token=None), t)


def _token_body(s: ClassicNodeState, t: ClassicToken) -> tuple[ClassicNodeState, HandlerOutcome]:
    i = s.id
    count_t = t.count_t + s.count_i
    black = furthest(i, s.black_i, t.black_t)
    if count_t == 0 and black == i:
        # announce freezes the node; the token is consumed
        return replace(s, black_i=black), HandlerOutcome(announced=True)
    succ = (i + 1) % s.n
    out = ClassicToken(count_t, furthest(i, black, succ))
    s = replace(s, count_i=0, black_i=i, seq_i=s.seq_i + 1)
    return s, HandlerOutcome(sends=[(succ, out)])
