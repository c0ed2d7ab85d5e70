"""Stream updates, the prover's frequency vector, and stream file formats.

Text format: one ``index delta`` pair per line, ``#`` starts a comment.
Binary format: consecutive records of (uint64 index, int64 delta), little
endian. Readers sniff the format, so both are accepted anywhere.
"""

from __future__ import annotations

import struct
import sys
from collections import defaultdict
from typing import BinaryIO, Iterable, Iterator, NamedTuple

import numpy as np

from . import field as F

_RECORD = struct.Struct("<Qq")


class StreamUpdate(NamedTuple):
    index: int
    delta: int


def universe_params(u: int, ell: int = 2) -> tuple[int, int]:
    """Pad u up to the next power of ell; returns (padded u, d). d >= 1."""
    if ell < 2:
        raise ValueError("branching factor must be at least 2")
    if u < 1:
        raise ValueError("universe must be non-empty")
    size, d = ell, 1
    while size < u:
        size *= ell
        d += 1
    return size, d


def as_updates(items: Iterable) -> list[StreamUpdate]:
    return [StreamUpdate(int(i), int(d)) for i, d in items]


def from_vector(vector: Iterable[int], unit: bool = False) -> list[StreamUpdate]:
    """Updates that build ``vector``; ``unit`` splits counts into +1/-1 steps."""
    out = []
    for i, v in enumerate(vector):
        v = int(v)
        if not v:
            continue
        if unit:
            step = 1 if v > 0 else -1
            out.extend(StreamUpdate(i, step) for _ in range(abs(v)))
        else:
            out.append(StreamUpdate(i, v))
    return out


class FrequencyVector:
    """The prover's full copy of the implicit vector (sparse storage)."""

    def __init__(self, u: int, updates: Iterable[StreamUpdate] = ()):
        self.u = u
        self._counts: dict[int, int] = defaultdict(int)
        for upd in updates:
            self.update(upd)

    def update(self, upd: StreamUpdate) -> None:
        i, delta = upd
        if not 0 <= i < self.u:
            raise IndexError(f"index {i} outside universe [0, {self.u})")
        self._counts[i] += delta
        if self._counts[i] == 0:
            del self._counts[i]

    def __getitem__(self, i: int) -> int:
        return self._counts.get(i, 0)

    def nonzero(self) -> list[tuple[int, int]]:
        return sorted(self._counts.items())

    def total(self) -> int:
        return sum(self._counts.values())

    def __len__(self) -> int:
        return len(self._counts)

    def to_list(self) -> list[int]:
        out = [0] * self.u
        for i, v in self._counts.items():
            out[i] = v
        return out

    def to_field_array(self, size: int | None = None) -> np.ndarray:
        arr = np.zeros(size or self.u, dtype=np.uint64)
        for i, v in self._counts.items():
            arr[i] = F.reduce(v)
        return arr

    def to_count_array(self, size: int | None = None) -> np.ndarray:
        arr = np.zeros(size or self.u, dtype=np.int64)
        for i, v in self._counts.items():
            arr[i] = v
        return arr

    def copy(self) -> "FrequencyVector":
        clone = FrequencyVector(self.u)
        clone._counts.update(self._counts)
        return clone


# -- file formats ------------------------------------------------------------

def parse_text(text: str) -> list[StreamUpdate]:
    updates = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'index delta', got {line!r}")
        updates.append(StreamUpdate(int(parts[0]), int(parts[1])))
    return updates


def parse_binary(data: bytes) -> list[StreamUpdate]:
    if len(data) % _RECORD.size:
        raise ValueError("binary stream length is not a multiple of 16 bytes")
    return [StreamUpdate(i, d) for i, d in _RECORD.iter_unpack(data)]


def parse_stream(data: bytes) -> list[StreamUpdate]:
    """Sniff text vs binary: text streams never contain NUL bytes."""
    if b"\x00" in data:
        return parse_binary(data)
    return parse_text(data.decode("ascii"))


def read_stream(path: str) -> list[StreamUpdate]:
    if path == "-":
        return parse_stream(sys.stdin.buffer.read())
    with open(path, "rb") as fh:
        return parse_stream(fh.read())


def encode_binary(updates: Iterable[StreamUpdate]) -> bytes:
    return b"".join(_RECORD.pack(i, d) for i, d in updates)


def encode_text(updates: Iterable[StreamUpdate]) -> str:
    return "".join(f"{i} {d}\n" for i, d in updates)


def write_stream(updates: Iterable[StreamUpdate], out: BinaryIO, binary: bool = False) -> None:
    if binary:
        out.write(encode_binary(updates))
    else:
        out.write(encode_text(updates).encode("ascii"))


def iter_chunks(updates: list[StreamUpdate], size: int) -> Iterator[list[StreamUpdate]]:
    for start in range(0, len(updates), size):
        yield updates[start:start + size]
