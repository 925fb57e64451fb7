"""Bounded exhaustive exploration of every interleaving.

States are deduplicated on their 64-bit digest. Breadth-first search gives
minimal counterexamples; depth-first search also reports cycles among
unannounced states; highway search keeps only a seeded random sample of each
breadth-first level and is never exhaustive.

Checked properties:

* ``announce-before-termination``: an announce fired while the basic
  algorithm had not terminated;
* ``active-after-announce`` / ``token-after-announce``: activity after an
  announce;
* any step invariant from :meth:`World.check_invariants`;
* liveness: every dead end with a surviving node has announced.
"""

from __future__ import annotations

import json
import random
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

from .digest import digest_u64s, hexdigest
from .ft import Variant
from .scenario import Runner, Trace
from .sim import GlobalState, Model, Transition, World

BFS = "bfs"
DFS = "dfs"
HIGHWAY = "highway"
STRATEGIES = (BFS, DFS, HIGHWAY)


@dataclass
class ExploreConfig:
    algorithm: str
    n: int
    variant: str = "fixed"
    m_cap: int = 2
    s_cap: int = 2
    max_crashes: int = 0
    strategy: str = BFS
    width: Optional[int] = None  # highway only
    seed: int = 0
    state_limit: Optional[int] = None
    workers: int = 1
    invariants: bool = True
    latency: bool = False
    keep_counterexamples: int = 1  # per property

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise ValueError(f"unknown strategy {self.strategy!r}")
        if self.strategy == HIGHWAY and (self.width is None or self.width < 1):
            raise ValueError("highway search needs a positive width")
        if self.workers < 1:
            raise ValueError("workers must be at least 1")
        self.variant = Variant.parse(self.variant).value
        self.model()  # validates the remaining fields

    def model(self) -> Model:
        return Model(self.algorithm, self.n, Variant.parse(self.variant), self.m_cap, self.s_cap, self.max_crashes)

    def to_json(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "variant": self.variant,
            "n": self.n,
            "m_cap": self.m_cap,
            "s_cap": self.s_cap,
            "max_crashes": self.max_crashes,
            "strategy": self.strategy,
            "width": self.width,
            "seed": self.seed,
            "state_limit": self.state_limit,
        }


@dataclass
class CounterExample:
    prop: str
    detail: str
    trace: Trace

    @property
    def length(self) -> int:
        return len(self.trace.records)

    def to_json(self) -> dict:
        return {"property": self.prop, "detail": self.detail, "steps": self.length,
                "transitions": self.trace.transitions()}


@dataclass
class Latency:
    max_token_sends: int
    bound: int  # alive nodes at the moment the worst case terminated
    entries: int  # terminated states entered from a non-terminated one
    over_n: int  # entries whose latency exceeds the alive count there
    over_2n: int
    lower_bound_only: bool

    def to_json(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExploreReport:
    config: ExploreConfig
    states_visited: int = 0
    transitions_fired: int = 0
    terminal_states: int = 0
    safety_violations: list = field(default_factory=list)
    liveness_violations: list = field(default_factory=list)  # (digest hex, CounterExample)
    violation_counts: dict = field(default_factory=dict)
    exhaustive: bool = True
    depth: int = 0
    cycles: int = 0
    future_drops: int = 0
    visited_digest: str = ""
    latency: Optional[Latency] = None
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.safety_violations and not self.liveness_violations

    def to_json(self) -> dict:
        return {
            "config": self.config.to_json(),
            "states_visited": self.states_visited,
            "transitions_fired": self.transitions_fired,
            "terminal_states": self.terminal_states,
            "exhaustive": self.exhaustive,
            "depth": self.depth,
            "cycles": self.cycles,
            "future_drops": self.future_drops,
            "visited_digest": self.visited_digest,
            "violation_counts": dict(sorted(self.violation_counts.items())),
            "safety_violations": [c.to_json() for c in self.safety_violations],
            "liveness_violations": [{"state": d, **c.to_json()} for d, c in self.liveness_violations],
            "latency": None if self.latency is None else self.latency.to_json(),
            "seconds": round(self.seconds, 3),
        }

    def summary(self) -> str:
        c = self.config
        lines = [
            f"{c.algorithm} {c.variant} n={c.n} M={c.m_cap} S={c.s_cap} crashes<={c.max_crashes} "
            f"{c.strategy}: {self.states_visited} states, {self.transitions_fired} transitions, "
            f"{self.terminal_states} terminal, exhaustive={self.exhaustive}",
        ]
        for ce in self.safety_violations:
            lines.append(f"  SAFETY {ce.prop}: {ce.detail} ({ce.length} steps)")
        for d, ce in self.liveness_violations:
            lines.append(f"  LIVENESS dead end {d} without announce ({ce.length} steps)")
        if self.latency is not None:
            lat = self.latency
            lines.append(f"  detection latency: max {lat.max_token_sends} token sends "
                         f"(alive nodes there: {lat.bound})" + (" [lower bound]" if lat.lower_bound_only else ""))
        if self.ok:
            lines.append("  no violations")
        return "\n".join(lines)


# ---- expansion (shared by in-process and worker paths) ----------------

@dataclass
class _Succ:
    transition: Transition
    digest: int
    state: GlobalState
    token_sends: int
    problems: list  # (property, detail)
    future_drop: bool


def _expand(world: World, g: GlobalState, invariants: bool) -> list[_Succ]:
    out = []
    announced_before = g.announced_by is not None
    for t in world.enabled(g):
        st = world.apply(g, t, check=False)
        problems = []
        if announced_before:
            if st.activated is not None:
                problems.append(("active-after-announce", f"node {st.activated} became active after announce"))
            if st.token_sends:
                problems.append(("token-after-announce", "token sent after announce"))
        if st.announced is not None and not world.terminated(st.state):
            problems.append(("announce-before-termination", f"node {st.announced} announced too early"))
        if invariants:
            problems.extend(world.check_invariants(st.state))
        out.append(_Succ(t, world.digest(st.state), st.state, st.token_sends, problems, st.future_drop))
    return out


_WORKER: dict = {}


def _worker_init(model: Model, invariants: bool):
    _WORKER["world"] = World(model)
    _WORKER["invariants"] = invariants


def _worker_expand(states: list) -> list:
    w = _WORKER["world"]
    return [_expand(w, g, _WORKER["invariants"]) for g in states]


# ---- the search --------------------------------------------------------

class Explorer:
    def __init__(self, cfg: ExploreConfig):
        self.cfg = cfg
        self.model = cfg.model()
        self.world = World(self.model)
        self.report = ExploreReport(cfg)
        self.parent: dict[int, Optional[int]] = {}
        self.term_states: dict[int, GlobalState] = {}
        self.entries: dict[int, int] = {}  # digest -> alive count, for latency
        self._pool = None

    def run(self) -> ExploreReport:
        t0 = time.perf_counter()
        g0, _ = self.world.initial()
        d0 = self.world.digest(g0)
        self.parent[d0] = None
        self._note_state(None, d0, g0)
        if self.cfg.workers > 1:
            self._pool = ProcessPoolExecutor(self.cfg.workers, initializer=_worker_init,
                                             initargs=(self.model, self.cfg.invariants))
        try:
            if self.cfg.strategy == DFS:
                self._dfs(d0, g0)
            else:
                self._bfs(d0, g0)
        finally:
            if self._pool is not None:
                self._pool.shutdown()
        r = self.report
        r.states_visited = len(self.parent)
        r.visited_digest = hexdigest(digest_u64s(sorted(self.parent)))
        if self.cfg.strategy == HIGHWAY:
            r.exhaustive = False
        if self.cfg.latency:
            r.latency = self._latency()
        r.seconds = time.perf_counter() - t0
        return r

    # bookkeeping common to all strategies
    def _note_state(self, parent_state: Optional[GlobalState], d: int, g: GlobalState):
        if not self.cfg.latency or g.announced_by is not None:
            return
        if self.world.terminated(g):
            self.term_states[d] = g
            if parent_state is None or not self.world.terminated(parent_state):
                self.entries[d] = len(g.alive())

    def _handle(self, d: int, g: GlobalState, succs: list[_Succ]) -> list[tuple[int, GlobalState]]:
        r = self.report
        fresh = []
        if not succs:
            r.terminal_states += 1
            if g.announced_by is None and g.alive():
                self._violation("liveness", "dead end without announce", d, None)
            return fresh
        for s in succs:
            r.transitions_fired += 1
            r.future_drops += int(s.future_drop)
            for prop, detail in s.problems:
                self._violation(prop, detail, d, s.transition)
            if s.digest not in self.parent:
                self.parent[s.digest] = d
                self._note_state(g, s.digest, s.state)
                fresh.append((s.digest, s.state))
        return fresh

    def _violation(self, prop: str, detail: str, d: int, t: Optional[Transition]):
        r = self.report
        r.violation_counts[prop] = r.violation_counts.get(prop, 0) + 1
        if r.violation_counts[prop] > self.cfg.keep_counterexamples:
            return
        trace = self.counterexample(d, t)
        ce = CounterExample(prop, detail, trace)
        if prop == "liveness":
            r.liveness_violations.append((hexdigest(d), ce))
        else:
            r.safety_violations.append(ce)

    def _limit_hit(self) -> bool:
        lim = self.cfg.state_limit
        if lim is not None and len(self.parent) >= lim:
            self.report.exhaustive = False
            return True
        return False

    def _expand_many(self, batch: list[tuple[int, GlobalState]]) -> list[list[_Succ]]:
        if self._pool is None or len(batch) < 2 * self.cfg.workers:
            return [_expand(self.world, g, self.cfg.invariants) for _, g in batch]
        states = [g for _, g in batch]
        k = max(1, len(states) // (4 * self.cfg.workers))
        chunks = [states[a:a + k] for a in range(0, len(states), k)]
        out = []
        for res in self._pool.map(_worker_expand, chunks):
            out.extend(res)
        return out

    def _bfs(self, d0: int, g0: GlobalState):
        cfg = self.cfg
        rng = random.Random(cfg.seed)
        frontier = [(d0, g0)]
        depth = 0
        while frontier:
            nxt = []
            batch_size = 512 if self._pool is not None else len(frontier)
            for a in range(0, len(frontier), batch_size):
                batch = frontier[a:a + batch_size]
                for (d, g), succs in zip(batch, self._expand_many(batch)):
                    nxt.extend(self._handle(d, g, succs))
                    if self._limit_hit():
                        self.report.depth = depth
                        return
            if cfg.strategy == HIGHWAY and len(nxt) > cfg.width:
                nxt.sort(key=lambda x: x[0])
                nxt = rng.sample(nxt, cfg.width)
                nxt.sort(key=lambda x: x[0])
            frontier = nxt
            if frontier:
                depth += 1
        self.report.depth = depth

    def _dfs(self, d0: int, g0: GlobalState):
        on_stack = {d0}
        succs0 = self._expand_many([(d0, g0)])[0]
        if not succs0:
            self._handle(d0, g0, succs0)
        stack = [(d0, g0, iter(succs0))]
        while stack:
            d, g, it = stack[-1]
            s = next(it, None)
            if s is None:
                stack.pop()
                on_stack.discard(d)
                continue
            r = self.report
            r.transitions_fired += 1
            r.future_drops += int(s.future_drop)
            for prop, detail in s.problems:
                self._violation(prop, detail, d, s.transition)
            if s.digest in on_stack and s.state.announced_by is None:
                r.cycles += 1
            if s.digest in self.parent:
                continue
            self.parent[s.digest] = d
            self._note_state(g, s.digest, s.state)
            if self._limit_hit():
                return
            succs = self._expand_many([(s.digest, s.state)])[0]
            if not succs:
                self._handle(s.digest, s.state, succs)
            on_stack.add(s.digest)
            stack.append((s.digest, s.state, iter(succs)))
            self.report.depth = max(self.report.depth, len(stack) - 1)

    # ---- counterexamples ---------------------------------------------
    def path_to(self, d: int) -> list[Transition]:
        chain = []
        while d is not None:
            chain.append(d)
            d = self.parent[d]
        chain.reverse()
        g, _ = self.world.initial()
        path = []
        for want in chain[1:]:
            for t in self.world.enabled(g):
                st = self.world.apply(g, t, check=False)
                if self.world.digest(st.state) == want:
                    path.append(t)
                    g = st.state
                    break
            else:  # pragma: no cover - digest collision or nondeterminism
                raise RuntimeError("could not reconstruct counterexample path")
        return path

    def counterexample(self, d: int, t: Optional[Transition]) -> Trace:
        path = self.path_to(d)
        if t is not None:
            path.append(t)
        runner = Runner(self.model)
        for tr in path:
            runner.step(tr)
        return runner.trace

    # ---- detection latency -------------------------------------------
    def _latency(self) -> Latency:
        w = self.world
        memo: dict[int, int] = {}
        for root in self.entries:
            if root in memo:
                continue
            # iterative post-order over the terminated region
            work = [(root, self.term_states[root])]
            active = set()
            while work:
                d, g = work[-1]
                if d in memo:
                    work.pop()
                    continue
                active.add(d)
                pending = []
                best = 0
                for t in w.enabled(g):
                    st = w.apply(g, t, check=False)
                    g2 = st.state
                    if g2.announced_by is not None:
                        best = max(best, st.token_sends)
                        continue
                    d2 = w.digest(g2)
                    if d2 in memo:
                        best = max(best, st.token_sends + memo[d2])
                    elif d2 in active:
                        raise RuntimeError("cycle among terminated states: detection latency unbounded")
                    else:
                        pending.append((d2, g2))
                if pending:
                    work.extend(pending)
                    continue
                memo[d] = best
                active.discard(d)
                work.pop()
        max_lat = 0
        bound = self.cfg.n
        over_n = over_2n = 0
        for d, alive in self.entries.items():
            lat = memo[d]
            if lat > max_lat or (lat == max_lat and alive < bound):
                max_lat, bound = lat, alive
            over_n += int(lat > alive)
            over_2n += int(lat > 2 * alive)
        return Latency(max_lat, bound, len(self.entries), over_n, over_2n,
                       lower_bound_only=not self.report.exhaustive)


def explore(cfg: ExploreConfig) -> ExploreReport:
    return Explorer(cfg).run()


def check_detection_latency(cfg: ExploreConfig) -> Latency:
    """Worst number of token sends between permanent termination and the announce."""
    cfg = ExploreConfig(**{**cfg.__dict__, "latency": True})
    return explore(cfg).latency


def write_report(report: ExploreReport, path, trace_dir=None):
    data = report.to_json()
    if trace_dir is not None:
        import os
        os.makedirs(trace_dir, exist_ok=True)
        files = []
        cases = [(c.prop, c) for c in report.safety_violations]
        cases += [("liveness", c) for _, c in report.liveness_violations]
        for k, (prop, ce) in enumerate(cases):
            name = os.path.join(trace_dir, f"cex-{k:02d}-{prop}.jsonl")
            ce.trace.write(name)
            files.append(name)
        data["trace_files"] = files
    with open(path, "w") as fh:
        json.dump(data, fh, indent=2, sort_keys=True)
        fh.write("\n")
