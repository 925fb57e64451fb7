"""Scenario files, trace files, scripted/seeded runs and replay.

A scenario is JSON::

    {"version": 1, "algorithm": "ft", "variant": "fixed", "n": 3,
     "m_cap": 4, "s_cap": 4, "mode": "scripted", "transitions": [...]}

or, for seeded runs, ``"mode": "seeded", "seeded": [seed, max_steps]``.
Optional keys: ``max_crashes``, ``initial_active``, ``name``.

A trace is JSON lines: one header object, then one record per step with
keys ``step``, ``kind``, ``actor``, ``detail`` and ``digest``.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from typing import Optional

from .core import payload_from_json
from .digest import ALGORITHM as DIGEST_ALGORITHM, hexdigest
from .sim import (CRASH, DELIVER, FD, KINDS, RESUME, SEND, GlobalState, Model, Step, Transition,
                  World)

FORMAT_VERSION = 1

# recorded but not fatal, so that what follows an unsafe announce stays observable
SOFT = frozenset({"announce-before-termination"})


class ScenarioError(ValueError):
    """Malformed scenario or trace file."""


class ReplayError(ValueError):
    def __init__(self, step: int, message: str):
        super().__init__(f"step {step}: {message}")
        self.step = step


@dataclass
class Scenario:
    algorithm: str
    n: int
    variant: str = "fixed"
    m_cap: int = 2
    s_cap: int = 2
    mode: str = "scripted"
    transitions: list = field(default_factory=list)
    seed: Optional[int] = None
    max_steps: Optional[int] = None
    max_crashes: Optional[int] = None
    initial_active: Optional[list] = None
    name: str = ""

    def model(self) -> Model:
        crashes = self.max_crashes
        if crashes is None:
            crashes = 0 if self.algorithm == "classic" else (self.n if self.mode == "scripted" else 0)
        return Model(
            algorithm=self.algorithm,
            n=self.n,
            variant=self.variant,
            m_cap=self.m_cap,
            s_cap=self.s_cap,
            max_crashes=crashes,
            initial_active=None if self.initial_active is None else tuple(self.initial_active),
        )

    def to_json(self) -> dict:
        d = {
            "version": FORMAT_VERSION,
            "algorithm": self.algorithm,
            "variant": self.variant,
            "n": self.n,
            "m_cap": self.m_cap,
            "s_cap": self.s_cap,
            "mode": self.mode,
        }
        if self.mode == "scripted":
            d["transitions"] = list(self.transitions)
        else:
            d["seeded"] = [self.seed, self.max_steps]
        if self.max_crashes is not None:
            d["max_crashes"] = self.max_crashes
        if self.initial_active is not None:
            d["initial_active"] = list(self.initial_active)
        if self.name:
            d["name"] = self.name
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Scenario":
        if not isinstance(d, dict):
            raise ScenarioError("scenario must be a JSON object")
        if d.get("version", FORMAT_VERSION) != FORMAT_VERSION:
            raise ScenarioError(f"unsupported scenario version {d.get('version')!r}")
        try:
            mode = d.get("mode", "scripted")
            sc = cls(
                algorithm=d["algorithm"],
                n=int(d["n"]),
                variant=d.get("variant", "fixed"),
                m_cap=int(d.get("m_cap", 2)),
                s_cap=int(d.get("s_cap", 2)),
                mode=mode,
                max_crashes=d.get("max_crashes"),
                initial_active=d.get("initial_active"),
                name=d.get("name", ""),
            )
            if mode == "scripted":
                sc.transitions = list(d["transitions"])
            elif mode == "seeded":
                seed, steps = d["seeded"] if "seeded" in d else (d["seed"], d["max_steps"])
                sc.seed, sc.max_steps = int(seed), int(steps)
            else:
                raise ScenarioError(f"unknown mode {mode!r}")
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError(f"malformed scenario: {exc!r}") from None
        try:
            sc.model()
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        return sc

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            with open(path) as fh:
                data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"{path}: not valid JSON ({exc})") from None
        return cls.from_json(data)


@dataclass
class Violation:
    prop: str
    step: int
    detail: str = ""

    def to_json(self) -> dict:
        return {"property": self.prop, "step": self.step, "detail": self.detail}


@dataclass
class Trace:
    header: dict
    records: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    final_state: Optional[GlobalState] = None
    announced_by: Optional[int] = None
    announce_terminated: Optional[bool] = None
    stats: dict = field(default_factory=dict)

    def transitions(self) -> list[dict]:
        """The fired transitions, in scripted-scenario form."""
        return [_record_transition(r["kind"], r["actor"], r["detail"]) for r in self.records]

    def lines(self) -> list[str]:
        dump = lambda obj: json.dumps(obj, sort_keys=True, separators=(",", ":"))
        return [dump(self.header)] + [dump(r) for r in self.records]

    def dumps(self) -> str:
        return "\n".join(self.lines()) + "\n"

    def write(self, path):
        with open(path, "w") as fh:
            fh.write(self.dumps())

    def events(self) -> list[str]:
        return [e for r in self.records for e in r["detail"]["events"]]


def header_for(model: Model, seed=None, max_steps=None, initial_digest: str = "") -> dict:
    return {
        "type": "header",
        "version": FORMAT_VERSION,
        "algorithm": model.algorithm,
        "variant": model.variant.value,
        "n": model.n,
        "m_cap": model.m_cap,
        "s_cap": model.s_cap,
        "max_crashes": model.max_crashes,
        "initial_active": None if model.initial_active is None else list(model.initial_active),
        "seed": seed,
        "max_steps": max_steps,
        "digest": DIGEST_ALGORITHM,
        "initial_digest": initial_digest,
    }


def model_from_header(h: dict) -> Model:
    try:
        act = h.get("initial_active")
        return Model(
            algorithm=h["algorithm"],
            n=int(h["n"]),
            variant=h["variant"],
            m_cap=int(h["m_cap"]),
            s_cap=int(h["s_cap"]),
            max_crashes=int(h["max_crashes"]),
            initial_active=None if act is None else tuple(act),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ScenarioError(f"bad trace header: {exc!r}") from None


def transition_pattern(d: dict, n: int):
    """Turn a JSON transition into ``(kind, actor, target, payload-or-partial-dict)``."""
    if not isinstance(d, dict) or d.get("kind") not in KINDS:
        raise ScenarioError(f"bad transition {d!r}")
    k = d["kind"]
    try:
        if k == SEND:
            return k, int(d["node"]), int(d["dest"]), None
        if k == DELIVER:
            return k, int(d["dst"]), int(d["src"]), dict(d.get("payload", {}))
        if k == FD:
            return k, int(d["observer"]), int(d["subject"]), None
        return k, int(d["node"]), None, None
    except (KeyError, TypeError, ValueError):
        raise ScenarioError(f"bad transition {d!r}") from None


def _payload_matches(pattern: dict, payload) -> bool:
    full = payload.to_json()
    for key, want in pattern.items():
        if key == "id":
            continue
        if key not in full or full[key] != want:
            return False
    return True


def resolve(world: World, g: GlobalState, d: dict, step: int) -> Transition:
    k, actor, target, pat = transition_pattern(d, world.n)
    cands = [t for t in world.enabled(g) if t.kind == k and t.actor == actor and t.target == target]
    if k == DELIVER:
        cands = [t for t in cands if _payload_matches(pat, t.payload)]
    if not cands:
        raise ReplayError(step, f"transition {json.dumps(d, sort_keys=True)} is not enabled")
    if len(cands) > 1:
        raise ReplayError(step, f"transition {json.dumps(d, sort_keys=True)} is ambiguous")
    return cands[0]


class Runner:
    """Drives a :class:`World` step by step with every monitor switched on."""

    def __init__(self, model: Model, seed=None, max_steps=None):
        self.world = World(model)
        self.state, init = self.world.initial()
        self.trace = Trace(header_for(model, seed, max_steps, hexdigest(self.world.digest(self.state))))
        self.accepted: set = set()
        self.stats = {"token_sends": init.token_sends, "backup_sends": 0, "crashes": 0,
                      "future_drops": 0, "steps": 0}
        self.trace.stats = self.stats
        self.trace.final_state = self.state
        if init.announced is not None:
            self._note_announce(init.announced, self.state)

    @property
    def stopped(self) -> bool:
        return any(v.prop not in SOFT for v in self.trace.violations)

    def _note_announce(self, node, state):
        self.trace.announced_by = node
        self.trace.announce_terminated = self.world.terminated(state)

    def step(self, t: Transition) -> Step:
        w = self.world
        g = self.state
        k = len(self.trace.records) + 1
        st = w.apply(g, t, check=False)
        found = []
        if g.announced_by is not None:
            if st.activated is not None:
                found.append(("active-after-announce", f"node {st.activated} became active"))
            if st.token_sends:
                found.append(("token-after-announce", "token sent after announce"))
        if st.accepted is not None:
            if st.accepted in self.accepted:
                found.append(("single-token", f"node {st.accepted[0]} accepted seq {st.accepted[1]} twice"))
            self.accepted.add(st.accepted)
        found.extend(w.check_invariants(st.state))
        self.stats["token_sends"] += st.token_sends
        self.stats["backup_sends"] += st.backup_sends
        self.stats["crashes"] += int(t.kind == CRASH)
        self.stats["future_drops"] += int(st.future_drop)
        self.stats["steps"] = k
        if st.announced is not None:
            self._note_announce(st.announced, st.state)
            if not self.trace.announce_terminated:
                found.append(("announce-before-termination", f"node {st.announced} announced too early"))
        detail = {x: y for x, y in t.to_json().items() if x != "kind"}
        detail.pop("node", None)
        detail.pop("observer", None)
        detail.pop("dst", None)
        detail["events"] = st.events
        if st.announced is not None:
            detail["terminated"] = self.trace.announce_terminated
        if found:
            detail["violations"] = [f"{p}: {d}" for p, d in found]
            self.trace.violations.extend(Violation(p, k, d) for p, d in found)
        self.trace.records.append({
            "step": k,
            "kind": t.kind,
            "actor": t.actor,
            "detail": detail,
            "digest": hexdigest(w.digest(st.state)),
        })
        self.state = st.state
        self.trace.final_state = st.state
        return st


def _record_transition(kind: str, actor: int, detail: dict) -> dict:
    d = {"kind": kind}
    if kind == SEND:
        d.update(node=actor, dest=detail["dest"])
    elif kind == DELIVER:
        d.update(dst=actor, src=detail["src"], payload=detail["payload"])
    elif kind == FD:
        d.update(observer=actor, subject=detail["subject"])
    else:
        d.update(node=actor)
    return d


def run_scenario(sc: Scenario) -> Trace:
    model = sc.model()
    if sc.mode == "scripted":
        r = Runner(model)
        for k, d in enumerate(sc.transitions, start=1):
            if r.stopped:
                break
            r.step(resolve(r.world, r.state, d, k))
        return r.trace
    rng = random.Random(sc.seed)
    r = Runner(model, sc.seed, sc.max_steps)
    for _ in range(sc.max_steps):
        if r.stopped:
            break
        options = r.world.enabled(r.state)
        if not options:
            break
        r.step(options[rng.randrange(len(options))])
    return r.trace


def parse_trace(text: str) -> tuple[dict, list[dict]]:
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise ScenarioError("empty trace")
    try:
        objs = [json.loads(ln) for ln in lines]
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"trace is not JSON lines ({exc})") from None
    header, records = objs[0], objs[1:]
    if not isinstance(header, dict) or header.get("type") != "header":
        raise ScenarioError("trace must start with a header line")
    if header.get("digest") != DIGEST_ALGORITHM:
        raise ScenarioError(f"trace digest algorithm {header.get('digest')!r} not supported")
    for r in records:
        if not isinstance(r, dict) or not {"step", "kind", "actor", "detail", "digest"} <= r.keys():
            raise ScenarioError(f"bad trace record {r!r}")
    return header, records


def replay(text: str) -> Trace:
    """Re-run a trace and check every digest; raises ReplayError on divergence."""
    header, records = parse_trace(text)
    model = model_from_header(header)
    r = Runner(model, header.get("seed"), header.get("max_steps"))
    if header.get("initial_digest") and header["initial_digest"] != r.trace.header["initial_digest"]:
        raise ReplayError(0, "initial state digest differs")
    for rec in records:
        k = rec["step"]
        try:
            d = _record_transition(rec["kind"], rec["actor"], rec["detail"])
            pattern = transition_pattern(d, model.n)
        except (KeyError, ScenarioError) as exc:
            raise ReplayError(k, f"cannot decode transition ({exc})") from None
        kind, actor, target, pat = pattern
        payload = payload_from_json(pat, model.n) if kind == DELIVER else None
        t = Transition(kind, actor, target, payload)
        if t not in r.world.enabled(r.state):
            raise ReplayError(k, f"{t.describe()} is not enabled")
        r.step(t)
        got = r.trace.records[-1]["digest"]
        if got != rec["digest"]:
            raise ReplayError(k, f"digest {got} differs from recorded {rec['digest']}")
    return r.trace
