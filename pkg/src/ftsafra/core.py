"""Ring identifiers, message and token types, and the ring-distance helper."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


class ContractViolation(ValueError):
    """A handler was called outside its precondition."""


def check_node(i: int, n: int) -> int:
    if not isinstance(i, int) or isinstance(i, bool) or not 0 <= i < n:
        raise ContractViolation(f"node id {i!r} out of range for ring of size {n}")
    return i


def furthest(i: int, j: int, k: int) -> int:
    """Return whichever of ``j`` and ``k`` lies furthest from ``i`` going round the ring.

    Ring size plays no role: the comparison only looks at the relative order
    of ``i``, ``j`` and ``k``.
    """
    if i <= j <= k or k < i <= j or j <= k < i:
        return k
    return j


@dataclass(frozen=True, order=True)
class BasicMessage:
    sender: int
    seq_m: int
    # trace label only; two messages with equal sender and seq are interchangeable
    payload_id: str = field(default="", compare=False)

    def to_json(self) -> dict:
        d = {"type": "basic", "sender": self.sender, "seq": self.seq_m}
        if self.payload_id:
            d["id"] = self.payload_id
        return d


@dataclass(frozen=True, order=True)
class ClassicToken:
    count_t: int
    black_t: int

    def to_json(self) -> dict:
        return {"type": "token", "count": self.count_t, "black": self.black_t}


@dataclass(frozen=True)
class FtToken:
    count_t: tuple[int, ...]
    black_t: int
    seq_t: int
    crashed_t: frozenset[int] = frozenset()

    @classmethod
    def initial(cls, n: int, black: int, seq: int = 0) -> "FtToken":
        return cls((0,) * n, black, seq, frozenset())

    def sort_key(self):
        return (self.seq_t, self.black_t, self.count_t, tuple(sorted(self.crashed_t)))

    def __lt__(self, other: "FtToken") -> bool:
        return self.sort_key() < other.sort_key()

    def to_json(self) -> dict:
        return {
            "type": "token",
            "count": list(self.count_t),
            "black": self.black_t,
            "seq": self.seq_t,
            "crashed": sorted(self.crashed_t),
        }


Token = Union[ClassicToken, FtToken]
Payload = Union[BasicMessage, ClassicToken, FtToken]


@dataclass
class HandlerOutcome:
    """What a handler asks the environment to do.

    ``sends`` holds ``(destination, payload)`` pairs in emission order.
    The remaining flags are observations used by the simulator's monitors.
    """

    sends: list = field(default_factory=list)
    announced: bool = False
    parked: bool = False
    accepted: Optional[int] = None  # seq of a token that passed the acceptance guard
    dropped: Optional[int] = None  # seq of a token rejected by the guard
    backup: bool = False
    discarded: bool = False
    suppressed: bool = False

    def __post_init__(self):
        if self.announced and self.sends:
            raise ContractViolation("announce must not be combined with sends")


def payload_from_json(d: dict, n: int) -> Payload:
    kind = d.get("type")
    if kind == "basic":
        return BasicMessage(int(d["sender"]), int(d["seq"]), str(d.get("id", "")))
    if kind == "token":
        if isinstance(d["count"], list):
            counts = tuple(int(c) for c in d["count"])
            if len(counts) != n:
                raise ValueError(f"token count vector has {len(counts)} entries, expected {n}")
            return FtToken(counts, int(d["black"]), int(d["seq"]), frozenset(int(c) for c in d["crashed"]))
        return ClassicToken(int(d["count"]), int(d["black"]))
    raise ValueError(f"unknown payload type {kind!r}")
