"""Message-level plumbing shared by every protocol.

A protocol run alternates verifier -> prover and prover -> verifier
payloads, each a list of field elements. :func:`interact` drives a prover
and a verifier and records every payload in a :class:`Transcript`; the
transcript's binary form is a sequence of records

    round: u16 | direction: u8 | count: u32 | count x u64 element

all little endian.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Any, Callable, Iterable, Optional

from . import field as F

V2P = 0
P2V = 1

_HEADER = struct.Struct("<HBI")


class ProtocolError(Exception):
    """Misuse of a protocol object (calls out of order, malformed setup)."""


class Rejected(Exception):
    """Verifier verdict: the prover's messages failed a check."""

    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


@dataclass(frozen=True)
class Record:
    round: int
    direction: int
    payload: tuple[int, ...]


@dataclass
class Transcript:
    records: list[Record] = field(default_factory=list)

    def add(self, round: int, direction: int, payload: Iterable[int]) -> None:
        self.records.append(Record(round, direction, tuple(int(x) for x in payload)))

    def prover_messages(self) -> list[tuple[int, ...]]:
        return [r.payload for r in self.records if r.direction == P2V]

    def verifier_messages(self) -> list[tuple[int, ...]]:
        return [r.payload for r in self.records if r.direction == V2P]

    def element_count(self, direction: int | None = None) -> int:
        return sum(len(r.payload) for r in self.records
                   if direction is None or r.direction == direction)

    def proof_bytes(self) -> int:
        return self.element_count(P2V) * F.ELEMENT_BYTES

    def to_bytes(self) -> bytes:
        out = bytearray()
        for rec in self.records:
            out += _HEADER.pack(rec.round, rec.direction, len(rec.payload))
            out += F.encode_elements(rec.payload)
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> "Transcript":
        t = cls()
        pos = 0
        while pos < len(data):
            if pos + _HEADER.size > len(data):
                raise ValueError("truncated transcript record header")
            rnd, direction, count = _HEADER.unpack_from(data, pos)
            pos += _HEADER.size
            end = pos + count * F.ELEMENT_BYTES
            if end > len(data):
                raise ValueError("truncated transcript record payload")
            if direction not in (V2P, P2V):
                raise ValueError(f"unknown direction {direction}")
            t.add(rnd, direction, F.decode_elements(data[pos:end]))
            pos = end
        return t

    def copy(self) -> "Transcript":
        return Transcript(list(self.records))

    def __len__(self) -> int:
        return len(self.records)


class Verifier:
    """Base class. Subclasses implement :meth:`query` and :meth:`receive`.

    ``receive`` returns the next verifier message, or ``None`` once the run
    is over and :attr:`result` is set; it raises :class:`Rejected` on a
    failed check.
    """

    protocol = "abstract"

    def __init__(self):
        self.result: Any = None
        self.finished = False
        self.messages_received = 0

    def query(self) -> list[int]:
        raise NotImplementedError

    def receive(self, payload: list[int]) -> Optional[list[int]]:
        raise NotImplementedError

    def state_elements(self) -> int:
        """Persistent protocol state, counted in field elements."""
        raise NotImplementedError

    def _finish(self, result: Any) -> None:
        self.result = result
        self.finished = True


class PhasedVerifier(Verifier):
    """Runs sub-verifiers back to back in one session.

    :meth:`next_phase` is called with the finished phase and returns the
    next verifier, or ``None`` when the whole run is complete.
    """

    def __init__(self, first: Verifier):
        super().__init__()
        self.phase = first
        self.phase_index = 0

    def query(self) -> list[int]:
        return self.phase.query()

    def receive(self, payload):
        self.messages_received += 1
        nxt = self.phase.receive(payload)
        if nxt is not None:
            return nxt
        follow = self.next_phase(self.phase)
        if follow is None:
            self._finish(self.final_result())
            return None
        self.phase = follow
        self.phase_index += 1
        return follow.query()

    def next_phase(self, done: Verifier) -> Optional[Verifier]:
        raise NotImplementedError

    def final_result(self) -> Any:
        return self.phase.result

    def state_elements(self) -> int:
        return self.phase.state_elements() + self.extra_state_elements()

    def extra_state_elements(self) -> int:
        return 0


class Prover:
    """Base class: answers one verifier message at a time."""

    def respond(self, payload: list[int]) -> list[int]:
        raise NotImplementedError

    @property
    def done(self) -> bool:
        raise NotImplementedError


@dataclass
class Outcome:
    accepted: bool
    result: Any
    transcript: Transcript
    failed_round: int | None = None
    reason: str | None = None
    max_state_elements: int = 0

    @property
    def verdict(self) -> str:
        return "ACCEPT" if self.accepted else "REJECT"


Tamper = Callable[[int, list[int]], list[int]]


def interact(prover: Prover, verifier: Verifier, transcript: Transcript | None = None) -> Outcome:
    """Run one session in-process; rejection is an outcome, not an error."""
    transcript = transcript if transcript is not None else Transcript()
    rnd = 1
    msg = verifier.query()
    transcript.add(rnd, V2P, msg)
    peak = verifier.state_elements()
    try:
        while True:
            reply = prover.respond(list(msg))
            transcript.add(rnd, P2V, reply)
            msg = verifier.receive(list(reply))
            peak = max(peak, verifier.state_elements())
            if msg is None:
                break
            rnd += 1
            transcript.add(rnd, V2P, msg)
    except Rejected as exc:
        return Outcome(False, None, transcript, rnd, exc.reason, peak)
    return Outcome(True, verifier.result, transcript, max_state_elements=peak)


def replay(transcript: Transcript, verifier: Verifier) -> Outcome:
    """Re-check recorded prover messages against a fresh verifier.

    Verifier messages are recomputed, not read back, so only the prover's
    side of the transcript can influence the verdict.
    """
    replies = [r for r in transcript.records if r.direction == P2V]
    verifier.query()
    peak = verifier.state_elements()
    rnd = 1
    try:
        for k, rec in enumerate(replies):
            rnd = rec.round
            msg = verifier.receive(list(rec.payload))
            peak = max(peak, verifier.state_elements())
            if msg is None:
                if k != len(replies) - 1:
                    raise Rejected("transcript continues after the verifier finished")
                return Outcome(True, verifier.result, transcript, max_state_elements=peak)
        raise Rejected("transcript ended before the protocol finished")
    except Rejected as exc:
        return Outcome(False, None, transcript, rnd, exc.reason, peak)


def expect(condition: bool, reason: str) -> None:
    if not condition:
        raise Rejected(reason)
