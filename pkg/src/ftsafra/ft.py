"""Fault-tolerant Safra: per-peer counters, backup tokens and crash reports.

Each node keeps the last token it accepted or forwarded (``stored_token``);
backup tokens are cut from it. A node's waits for passivity are kept as a
small stack of continuation markers in ``parked``: ``"rt"`` for a token
accepted while active and ``"ns"`` for a sole survivor waiting to announce.
The ``"rt"`` continuation resumes on the token as it was accepted
(``pending_token``), not on the stored copy a backup may have rewritten.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional

from .core import BasicMessage, ContractViolation, FtToken, HandlerOutcome, check_node, furthest

RT = "rt"
NS = "ns"


class Variant(str, enum.Enum):
    FIXED = "fixed"
    KFF21 = "kff21-buggy"

    @classmethod
    def parse(cls, value) -> "Variant":
        if isinstance(value, cls):
            return value
        try:
            return cls(value)
        except ValueError:
            raise ValueError(f"unknown variant {value!r}; expected one of {[v.value for v in cls]}") from None


@dataclass(frozen=True)
class FtNodeState:
    id: int
    n: int
    count: tuple[int, ...]
    black_i: int
    seq_i: int
    next_i: int
    crashed_set: frozenset[int]
    report_set: frozenset[int]
    passive: bool
    stored_token: FtToken
    parked: tuple[str, ...] = ()
    pending_token: Optional[FtToken] = None

    def known_crashed(self) -> frozenset[int]:
        return self.crashed_set | self.report_set

    def encode(self) -> tuple:
        t = self.stored_token
        return (
            2,
            *self.count,
            self.black_i,
            self.seq_i,
            self.next_i,
            len(self.crashed_set),
            *sorted(self.crashed_set),
            len(self.report_set),
            *sorted(self.report_set),
            int(self.passive),
            *_encode_token(t),
            len(self.parked),
            *(1 if p == RT else 2 for p in self.parked),
            *(() if self.pending_token is None else _encode_token(self.pending_token)),
        )


def _encode_token(t: FtToken) -> tuple:
    return (*t.count_t, t.black_t, t.seq_t, len(t.crashed_t), *sorted(t.crashed_t))


def ft_init(i: int, n: int, passive: bool = False,
            variant: Variant = Variant.FIXED) -> tuple[FtNodeState, HandlerOutcome]:
    if n < 1:
        raise ContractViolation("ring size must be positive")
    check_node(i, n)
    s = FtNodeState(
        id=i,
        n=n,
        count=(0,) * n,
        black_i=i,
        seq_i=0,
        next_i=(i + 1) % n,
        crashed_set=frozenset(),
        report_set=frozenset(),
        passive=passive,
        stored_token=FtToken.initial(n, black=i),
    )
    if i != 0:
        return s, HandlerOutcome()
    return ft_receive_token(s, FtToken.initial(n, black=n - 1, seq=1), variant)


def ft_send_basic(s: FtNodeState, dest: int, payload_id: str = "") -> tuple[FtNodeState, HandlerOutcome]:
    check_node(dest, s.n)
    if dest == s.id:
        raise ContractViolation("self-sends are not supported")
    if s.passive:
        raise ContractViolation(f"node {s.id} is passive and cannot send basic messages")
    if dest in s.crashed_set or dest in s.report_set or dest in s.stored_token.crashed_t:
        return s, HandlerOutcome(suppressed=True)
    count = list(s.count)
    count[dest] += 1
    m = BasicMessage(s.id, s.seq_i, payload_id)
    return replace(s, count=tuple(count)), HandlerOutcome(sends=[(dest, m)])


def ft_receive_basic(s: FtNodeState, m: BasicMessage) -> tuple[FtNodeState, HandlerOutcome]:
    j = m.sender
    if j in s.crashed_set:
        return s, HandlerOutcome(discarded=True)
    black = s.black_i
    if m.seq_m == s.seq_i + 1 or (j > s.id and m.seq_m == s.seq_i):
        black = furthest(s.id, black, j)
    count = list(s.count)
    count[j] -= 1
    return replace(s, black_i=black, count=tuple(count), passive=False), HandlerOutcome()


def ft_receive_token(s: FtNodeState, t: FtToken,
                     variant: Variant = Variant.FIXED) -> tuple[FtNodeState, HandlerOutcome]:
    if s.parked:
        raise ContractViolation(f"node {s.id} is waiting and cannot take a token")
    if t.seq_t != s.seq_i + 1:
        return s, HandlerOutcome(dropped=t.seq_t)
    s = replace(s, stored_token=t)
    if not s.passive:
        return replace(s, parked=(RT,), pending_token=t), HandlerOutcome(parked=True, accepted=t.seq_t)
    s, out = _token_body(s, t, variant)
    out.accepted = t.seq_t
    return s, out


def ft_resume(s: FtNodeState, variant: Variant = Variant.FIXED) -> tuple[FtNodeState, HandlerOutcome]:
    """Run the innermost parked continuation of a node that has become passive."""
    if not s.parked:
        raise ContractViolation(f"node {s.id} has nothing parked")
    if not s.passive:
        raise ContractViolation(f"node {s.id} is still active")
    top = s.parked[-1]
    s = replace(s, parked=s.parked[:-1])
    if top == NS:
        return _sole_survivor_announce(s, variant)
    t = s.pending_token
    return _token_body(replace(s, pending_token=None), t, variant)


def _sole_survivor_announce(s: FtNodeState, variant: Variant) -> tuple[FtNodeState, HandlerOutcome]:
    if variant is Variant.FIXED:
        s = replace(s, crashed_set=s.crashed_set | s.report_set, report_set=frozenset())
    return replace(s, parked=(), pending_token=None), HandlerOutcome(announced=True)


def ft_new_successor(s: FtNodeState, variant: Variant = Variant.FIXED) -> tuple[FtNodeState, HandlerOutcome]:
    i, n = s.id, s.n
    known = s.crashed_set | s.report_set
    nxt = (s.next_i + 1) % n
    while nxt in known:
        nxt = (nxt + 1) % n
    s = replace(s, next_i=nxt)
    if nxt == i:
        if not s.passive:
            return replace(s, parked=s.parked + (NS,)), HandlerOutcome(parked=True)
        return _sole_survivor_announce(s, variant)
    if s.black_i != i:
        s = replace(s, black_i=furthest(i, s.black_i, nxt))
    return s, HandlerOutcome()


def ft_failure_detector(s: FtNodeState, j: int,
                        variant: Variant = Variant.FIXED) -> tuple[FtNodeState, HandlerOutcome]:
    check_node(j, s.n)
    if j == s.id:
        raise ContractViolation("a node cannot be told about its own crash")
    if j in s.crashed_set or j in s.report_set:
        return s, HandlerOutcome()
    s = replace(s, report_set=s.report_set | {j})
    if j != s.next_i:
        return s, HandlerOutcome()
    s, out = ft_new_successor(s, variant)
    if out.announced or out.parked:
        return s, out
    i = s.id
    if s.seq_i > 0 or s.next_i < i:
        t = s.stored_token
        t = replace(
            t,
            crashed_t=t.crashed_t | s.report_set,
            black_t=i,
            seq_t=s.seq_i + 1 if s.next_i < i else t.seq_t,
        )
        s = replace(s, stored_token=t)
        return s, HandlerOutcome(sends=[(s.next_i, t)], backup=True)
    return s, HandlerOutcome()


def _token_body(s: FtNodeState, t: FtToken, variant: Variant) -> tuple[FtNodeState, HandlerOutcome]:
    # everything after the wait in ReceiveToken
    i = s.id
    black = furthest(i, s.black_i, t.black_t)
    crashed_t = t.crashed_t - s.crashed_set
    crashed = s.crashed_set | crashed_t
    report = s.report_set - crashed_t
    counts = list(t.count_t)
    if black == i or not report:
        counts[i] = sum(c for j, c in enumerate(s.count) if j not in crashed)
    s = replace(s, black_i=black, crashed_set=crashed, report_set=report)
    if black == i:
        total = sum(c for j, c in enumerate(counts) if j not in crashed)
        if total == 0:
            t = replace(t, count_t=tuple(counts), crashed_t=crashed_t)
            return replace(s, stored_token=t), HandlerOutcome(announced=True)
    if s.next_i in crashed_t:
        s, out = ft_new_successor(s, variant)
        if out.announced:
            t = replace(t, count_t=tuple(counts), crashed_t=crashed_t)
            return replace(s, stored_token=t), out
    seq_t = t.seq_t + 1 if s.next_i < i else t.seq_t
    if s.report_set:
        crashed_t = crashed_t | s.report_set
        black_t = i
        s = replace(s, crashed_set=s.crashed_set | s.report_set, report_set=frozenset())
    else:
        black_t = furthest(i, s.black_i, s.next_i)
    t = FtToken(tuple(counts), black_t, seq_t, crashed_t)
    s = replace(s, stored_token=t, black_i=i, seq_i=s.seq_i + 1)
    return s, HandlerOutcome(sends=[(s.next_i, t)])
