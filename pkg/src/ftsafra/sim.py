"""Deterministic crash-prone network: global state, enabled steps and their effects.

The basic algorithm is abstract. Nodes are active or passive, an active node
may send to any peer it does not know to be dead while the global message
budget lasts, and may go passive at any moment. Channels are reliable and
unordered. Messages addressed to a node vanish when it crashes, while messages
it sent earlier stay deliverable. Crash notifications are delivered by a
global failure-detector process, one per (observer, crashed node) pair.

Token circulation is capped: once ``s_cap`` round trips have completed,
tokens only move while the basic algorithm is terminated. After an announce
the control layer halts; only basic messages still drain so that a late
reactivation can be observed.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from typing import Optional

from . import classic, ft
from .core import BasicMessage, ClassicToken, ContractViolation, FtToken, HandlerOutcome, Payload
from .digest import digest_words
from .ft import Variant

CLASSIC = "classic"
FT = "ft"
ALGORITHMS = (CLASSIC, FT)

SEND = "send"
PASSIVE = "passive"
DELIVER = "deliver"
CRASH = "crash"
FD = "fd"
RESUME = "resume"
KINDS = (DELIVER, SEND, PASSIVE, RESUME, FD, CRASH)


class DisabledTransition(ValueError):
    """A transition was applied in a state where it is not enabled."""


@dataclass(frozen=True)
class Model:
    algorithm: str
    n: int
    variant: Variant = Variant.FIXED
    m_cap: int = 2
    s_cap: int = 2
    max_crashes: int = 0
    initial_active: Optional[tuple[int, ...]] = None  # None: every node starts active

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}")
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.n < 1 or (self.algorithm == CLASSIC and self.n < 2):
            raise ValueError(f"ring size {self.n} not supported by {self.algorithm}")
        if self.m_cap < 0 or self.s_cap < 1:
            raise ValueError("need m_cap >= 0 and s_cap >= 1")
        if not 0 <= self.max_crashes <= self.n:
            raise ValueError("max_crashes must lie in [0, n]")
        if self.algorithm == CLASSIC and self.max_crashes:
            raise ValueError("the classic algorithm does not tolerate crashes")
        if self.initial_active is not None:
            act = tuple(sorted(set(self.initial_active)))
            if any(not 0 <= i < self.n for i in act):
                raise ValueError("initial_active names a node outside the ring")
            object.__setattr__(self, "initial_active", act)

    @property
    def overrun_cap(self) -> int:
        """Round count at which tokens stop moving altogether.

        A correct protocol announces long before this; reaching it turns a
        missed detection into a dead end that the liveness check reports.
        """
        return self.s_cap + 2 * self.n + 2


@dataclass(frozen=True)
class GlobalState:
    nodes: tuple  # node state, or None once crashed
    basic: tuple  # per directed edge (src * n + dst): sorted tuple of BasicMessage
    tokens: tuple  # per directed edge: sorted tuple of tokens
    fd_pending: frozenset  # (observer, subject) pairs not yet notified
    messages_remaining: int
    rounds_used: int = 0
    crashes_used: int = 0
    announced_by: Optional[int] = None

    @property
    def n(self) -> int:
        return len(self.nodes)

    def alive(self) -> list[int]:
        return [i for i, s in enumerate(self.nodes) if s is not None]

    def crashed(self) -> frozenset[int]:
        return frozenset(i for i, s in enumerate(self.nodes) if s is None)

    def in_flight(self, src: int, dst: int) -> int:
        return len(self.basic[src * self.n + dst])

    def total_in_flight(self) -> int:
        return sum(len(c) for c in self.basic)


@dataclass(frozen=True, order=True)
class Transition:
    kind: str
    actor: int  # sender, passivating/resuming/crashing node, receiver of a delivery, fd observer
    target: Optional[int] = None  # send destination, delivery source, fd subject
    payload: Optional[Payload] = field(default=None, compare=False)

    def __hash__(self):
        return hash((self.kind, self.actor, self.target, _payload_key(self.payload)))

    def __eq__(self, other):
        if not isinstance(other, Transition):
            return NotImplemented
        return (self.kind, self.actor, self.target, _payload_key(self.payload)) == (
            other.kind, other.actor, other.target, _payload_key(other.payload))

    def to_json(self) -> dict:
        k = self.kind
        if k == SEND:
            return {"kind": k, "node": self.actor, "dest": self.target}
        if k == DELIVER:
            return {"kind": k, "src": self.target, "dst": self.actor, "payload": self.payload.to_json()}
        if k == FD:
            return {"kind": k, "observer": self.actor, "subject": self.target}
        return {"kind": k, "node": self.actor}

    def describe(self) -> str:
        k = self.kind
        if k == SEND:
            return f"send {self.actor}->{self.target}"
        if k == DELIVER:
            what = "token" if not isinstance(self.payload, BasicMessage) else "basic"
            return f"deliver {what} {self.target}->{self.actor}"
        if k == FD:
            return f"fd {self.actor} learns {self.target} crashed"
        return f"{k} {self.actor}"


def _payload_key(p):
    if p is None:
        return None
    if isinstance(p, BasicMessage):
        return ("b", p.sender, p.seq_m)
    if isinstance(p, ClassicToken):
        return ("c", p.count_t, p.black_t)
    return ("f",) + p.sort_key()


@dataclass
class Step:
    """Successor state plus what happened on the way."""

    state: GlobalState
    events: list = field(default_factory=list)
    announced: Optional[int] = None
    activated: Optional[int] = None
    token_sends: int = 0
    backup_sends: int = 0
    accepted: Optional[tuple[int, int]] = None
    dropped: Optional[tuple[int, int]] = None  # (node, token seq) rejected by the guard
    future_drop: bool = False  # rejected token had seq beyond seq_i + 1


def _is_parked(s) -> bool:
    if isinstance(s, ft.FtNodeState):
        return bool(s.parked)
    return s.parked_token is not None


def _insert(chan: tuple, item) -> tuple:
    lst = list(chan)
    bisect.insort(lst, item)
    return tuple(lst)


def _remove(chan: tuple, item) -> tuple:
    key = _payload_key(item)
    for k, x in enumerate(chan):
        if _payload_key(x) == key:
            return chan[:k] + chan[k + 1:]
    raise DisabledTransition(f"payload {item} not in channel")


class World:
    """Semantics of one :class:`Model`: initial state, enabled steps, successor."""

    def __init__(self, model: Model):
        self.model = model
        self.n = model.n
        self.is_ft = model.algorithm == FT
        self.variant = model.variant

    # ---- construction -------------------------------------------------
    def initial(self) -> tuple[GlobalState, list]:
        """Initial state (after every node's initialisation) and its events."""
        m = self.model
        n = self.n
        active = set(range(n)) if m.initial_active is None else set(m.initial_active)
        nodes = []
        outs = []
        for i in range(n):
            if self.is_ft:
                s, out = ft.ft_init(i, n, passive=i not in active, variant=self.variant)
            else:
                s, out = classic.classic_init(i, n, passive=i not in active)
            nodes.append(s)
            outs.append((i, out))
        g = GlobalState(
            nodes=tuple(nodes),
            basic=((),) * (n * n),
            tokens=((),) * (n * n),
            fd_pending=frozenset(),
            messages_remaining=m.m_cap,
        )
        st = Step(g)
        for i, out in outs:
            self._absorb(st, i, out)
        return st.state, st

    # ---- predicates ---------------------------------------------------
    def terminated(self, g: GlobalState) -> bool:
        n = self.n
        nodes = g.nodes
        for s in nodes:
            if s is not None and not s.passive:
                return False
        for e, chan in enumerate(g.basic):
            if not chan:
                continue
            if not self.is_ft:
                return False
            dst = nodes[e % n]
            if dst is not None and (e // n) not in dst.crashed_set:
                return False
        return True

    def enabled(self, g: GlobalState) -> list[Transition]:
        n = self.n
        m = self.model
        nodes = g.nodes
        out = []
        announced = g.announced_by is not None
        gated = None  # computed on demand
        for dst in range(n):
            ds = nodes[dst]
            if ds is None:
                continue
            for src in range(n):
                e = src * n + dst
                prev = None
                for msg in g.basic[e]:
                    if msg != prev:
                        out.append(Transition(DELIVER, dst, src, msg))
                        prev = msg
                if announced or not g.tokens[e] or _is_parked(ds):
                    continue
                if gated is None:
                    gated = self._token_gated(g)
                if gated:
                    continue
                prev = None
                for tok in g.tokens[e]:
                    if tok != prev:
                        out.append(Transition(DELIVER, dst, src, tok))
                        prev = tok
        if announced:
            return out
        if g.messages_remaining > 0:
            for i, s in enumerate(nodes):
                if s is None or s.passive:
                    continue
                for j in range(n):
                    if j != i and self._may_send(s, j):
                        out.append(Transition(SEND, i, j))
        for i, s in enumerate(nodes):
            if s is not None and not s.passive:
                out.append(Transition(PASSIVE, i))
        for i, s in enumerate(nodes):
            if s is None or not s.passive or not _is_parked(s):
                continue
            if self._resume_forwards(s):
                if gated is None:
                    gated = self._token_gated(g)
                if gated:
                    continue
            out.append(Transition(RESUME, i))
        for obs, subj in sorted(g.fd_pending):
            out.append(Transition(FD, obs, subj))
        if g.crashes_used < m.max_crashes:
            for i, s in enumerate(nodes):
                if s is not None:
                    out.append(Transition(CRASH, i))
        return out

    def _token_gated(self, g: GlobalState) -> bool:
        if g.rounds_used >= self.model.overrun_cap:
            return True
        return g.rounds_used >= self.model.s_cap and not self.terminated(g)

    def _resume_forwards(self, s) -> bool:
        if self.is_ft:
            return s.parked[-1] == ft.RT
        return True

    def _may_send(self, s, j: int) -> bool:
        if not self.is_ft:
            return True
        return not (j in s.crashed_set or j in s.report_set or j in s.stored_token.crashed_t)

    # ---- successor ----------------------------------------------------
    def apply(self, g: GlobalState, t: Transition, check: bool = True) -> Step:
        if check and t not in self.enabled(g):
            raise DisabledTransition(f"{t.describe()} is not enabled")
        k = t.kind
        i = t.actor
        nodes = g.nodes
        s = nodes[i]
        st = Step(g)
        if k == CRASH:
            self._crash(st, i)
            return st
        if s is None:
            raise DisabledTransition(f"node {i} has crashed")
        if k == SEND:
            pid = f"m{self.model.m_cap - g.messages_remaining + 1}"
            if self.is_ft:
                s2, out = ft.ft_send_basic(s, t.target, pid)
                if out.suppressed:
                    raise DisabledTransition(f"send {i}->{t.target} is suppressed by the guard")
            else:
                s2, out = classic.classic_send_basic(s, t.target, pid)
            st.state = replace(g, messages_remaining=g.messages_remaining - 1)
        elif k == PASSIVE:
            if s.passive:
                raise DisabledTransition(f"node {i} is already passive")
            s2, out = replace(s, passive=True), HandlerOutcome()
        elif k == RESUME:
            if self.is_ft:
                s2, out = ft.ft_resume(s, self.variant)
            else:
                s2, out = classic.classic_resume(s)
        elif k == FD:
            if not self.is_ft:
                raise DisabledTransition("no failure detector in the classic algorithm")
            pair = (i, t.target)
            if pair not in g.fd_pending:
                raise DisabledTransition(f"no pending notification {pair}")
            st.state = replace(g, fd_pending=g.fd_pending - {pair})
            s2, out = ft.ft_failure_detector(s, t.target, self.variant)
        elif k == DELIVER:
            e = t.target * self.n + i
            p = t.payload
            if isinstance(p, BasicMessage):
                basic = list(g.basic)
                basic[e] = _remove(basic[e], p)
                st.state = replace(g, basic=tuple(basic))
                if self.is_ft:
                    s2, out = ft.ft_receive_basic(s, p)
                else:
                    s2, out = classic.classic_receive_basic(s, p)
                if out.discarded:
                    st.events.append(f"discard node={i} from={p.sender}")
            else:
                tokens = list(g.tokens)
                tokens[e] = _remove(tokens[e], p)
                st.state = replace(g, tokens=tuple(tokens))
                if self.is_ft:
                    s2, out = ft.ft_receive_token(s, p, self.variant)
                else:
                    s2, out = classic.classic_receive_token(s, p)
        else:
            raise DisabledTransition(f"unknown transition kind {k!r}")
        if s.passive and not s2.passive:
            st.activated = i
            st.events.append(f"activate node={i}")
        g2 = st.state
        st.state = replace(g2, nodes=g2.nodes[:i] + (s2,) + g2.nodes[i + 1:])
        self._absorb(st, i, out)
        return st

    def _absorb(self, st: Step, i: int, out: HandlerOutcome):
        g = st.state
        if out.parked:
            st.events.append(f"park node={i}")
        if out.accepted is not None:
            st.accepted = (i, out.accepted)
        if out.dropped is not None:
            st.dropped = (i, out.dropped)
            seq_i = g.nodes[i].seq_i
            st.future_drop = out.dropped > seq_i + 1
            st.events.append(f"token-drop node={i} seq={out.dropped}")
        if out.sends:
            basic = list(g.basic)
            tokens = list(g.tokens)
            rounds = g.rounds_used
            for dest, p in out.sends:
                alive = g.nodes[dest] is not None
                e = i * self.n + dest
                if isinstance(p, BasicMessage):
                    if alive:
                        basic[e] = _insert(basic[e], p)
                    continue
                st.token_sends += 1
                if out.backup:
                    st.backup_sends += 1
                if isinstance(p, FtToken):
                    rounds = max(rounds, p.seq_t - 1)
                elif dest == 0:
                    rounds += 1
                tag = "backup-send" if out.backup else "token-send"
                st.events.append(f"{tag} {i}->{dest}" + ("" if alive else " lost"))
                if alive:
                    tokens[e] = _insert(tokens[e], p)
            g = replace(g, basic=tuple(basic), tokens=tuple(tokens), rounds_used=rounds)
        if out.announced:
            g = replace(g, announced_by=i)
            st.announced = i
            st.events.append(f"announce node={i}")
        st.state = g

    def _crash(self, st: Step, c: int):
        g = st.state
        n = self.n
        if g.nodes[c] is None:
            raise DisabledTransition(f"node {c} already crashed")
        if g.crashes_used >= self.model.max_crashes:
            raise DisabledTransition("crash budget exhausted")
        basic = list(g.basic)
        tokens = list(g.tokens)
        for src in range(n):
            basic[src * n + c] = ()
            tokens[src * n + c] = ()
        nodes = g.nodes[:c] + (None,) + g.nodes[c + 1:]
        pending = {p for p in g.fd_pending if p[0] != c}
        if self.is_ft:
            pending.update((o, c) for o, s in enumerate(nodes) if s is not None)
        st.state = replace(
            g,
            nodes=nodes,
            basic=tuple(basic),
            tokens=tuple(tokens),
            fd_pending=frozenset(pending),
            crashes_used=g.crashes_used + 1,
        )
        st.events.append(f"crash node={c}")

    # ---- monitors -----------------------------------------------------
    def check_invariants(self, g: GlobalState) -> list[tuple[str, str]]:
        """Step-local invariants; returns ``(property, detail)`` for each failure."""
        bad = []
        n = self.n
        if g.messages_remaining < 0:
            bad.append(("budget", f"messages_remaining={g.messages_remaining}"))
        if self.is_ft:
            crashed = g.crashed()
            alive = g.alive()
            for obs, subj in g.fd_pending:
                if subj not in crashed or obs in crashed:
                    bad.append(("fd-exactness", f"pending ({obs},{subj})"))
            for e, toks in enumerate(g.tokens):
                for tok in toks:
                    if not tok.crashed_t <= crashed:
                        bad.append(("detector-soundness", f"token on edge {e // n}->{e % n}"))
                    if tok.seq_t < 1:
                        bad.append(("token-seq", f"token with seq {tok.seq_t} in flight"))
            for i in alive:
                s = g.nodes[i]
                held = s.stored_token.crashed_t | (s.pending_token.crashed_t if s.pending_token else frozenset())
                if not (s.crashed_set | s.report_set | held) <= crashed:
                    bad.append(("detector-soundness", f"node {i}"))
                if s.crashed_set & s.report_set:
                    bad.append(("crash-sets-disjoint", f"node {i}"))
                if s.count[i] != 0:
                    bad.append(("self-count", f"node {i}"))
                # an announcer halts before it would pick a new successor
                if g.announced_by != i and (s.next_i in s.crashed_set or s.next_i in s.report_set):
                    bad.append(("next-alive", f"node {i} next={s.next_i}"))
            for a in alive:
                for b in alive:
                    if a < b:
                        lhs = g.nodes[a].count[b] + g.nodes[b].count[a]
                        rhs = g.in_flight(a, b) + g.in_flight(b, a)
                        if lhs != rhs:
                            bad.append(("pairwise-conservation", f"nodes {a},{b}: {lhs} != {rhs}"))
        elif g.announced_by is None:
            held = [s.parked_token for s in g.nodes if s.parked_token is not None and not s.bootstrapping]
            flying = [t for chan in g.tokens for t in chan]
            toks = held + flying
            booting = g.nodes[0].bootstrapping
            if len(toks) + int(booting) != 1:
                bad.append(("single-token", f"{len(toks)} tokens live"))
            count_t = toks[0].count_t if len(toks) == 1 else 0
            total = count_t + sum(s.count_i for s in g.nodes)
            if (len(toks) == 1 or booting) and total != g.total_in_flight():
                bad.append(("counter-conservation", f"{total} != {g.total_in_flight()} in flight"))
        return bad

    # ---- digests ------------------------------------------------------
    def encode(self, g: GlobalState) -> list[int]:
        words = [0x5AF7A, self.n]
        for s in g.nodes:
            if s is None:
                words.append(-1)
                continue
            enc = s.__dict__.get("_enc")
            if enc is None:
                enc = s.encode()
                object.__setattr__(s, "_enc", enc)
            words.extend(enc)
        for e in range(self.n * self.n):
            b = g.basic[e]
            tk = g.tokens[e]
            if not b and not tk:
                continue
            words.append(e)
            words.append(len(b))
            words.extend(m.seq_m for m in b)
            words.append(len(tk))
            for t in tk:
                if isinstance(t, FtToken):
                    words.extend(t.count_t)
                    words.append(t.black_t)
                    words.append(t.seq_t)
                    words.append(len(t.crashed_t))
                    words.extend(sorted(t.crashed_t))
                else:
                    words.append(t.count_t)
                    words.append(t.black_t)
        words.append(-2)
        for obs, subj in sorted(g.fd_pending):
            words.append(obs * self.n + subj)
        words.append(-3)
        words.append(g.messages_remaining)
        words.append(g.rounds_used)
        words.append(g.crashes_used)
        words.append(-1 if g.announced_by is None else g.announced_by)
        return words

    def digest(self, g: GlobalState) -> int:
        return digest_words(self.encode(g))
