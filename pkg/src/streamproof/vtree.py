"""Sub-vector hash tree and the reporting queries reduced to it.

Level 0 holds the vector; a level-j node with children (left, right) has
hash left + right * r_j. The verifier keeps only the root t, built update by
update as t += delta * prod_j r_j^{bit_{j-1}(i)}.

Protocol for [qL, qR] (0-based): the prover sends the nonzero entries in
the range plus the leaf just outside each end when the verifier needs it
to pair up (left when qL is odd, right when qR is even). Then for
j = 1..d-1 the verifier reveals r_j and the prover sends the level-j
siblings the verifier cannot rebuild, by the same parity rule applied to
[qL >> j, qR >> j]. The verifier folds everything into the root as a
linear combination, so it never holds more than a couple of running sums.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from . import field as F
from .protocol import PhasedVerifier, Prover, ProtocolError, Verifier, expect
from .stream import FrequencyVector, StreamUpdate

DENSE_THRESHOLD = 1 << 26


def _leaf_weight(i: int, seeds: Sequence[int], first: int = 0) -> int:
    """prod of seeds[first + b] over the set bits b of i."""
    w = 1
    k = first
    while i:
        if i & 1:
            w = w * seeds[k] % F.P
        i >>= 1
        k += 1
    return w


class TreeHashAccumulator:
    def __init__(self, seeds: Sequence[int]):
        if not seeds:
            raise ValueError("need at least one tree level")
        self.seeds = tuple(seeds)
        self.u = 1 << len(seeds)
        self.root = 0

    @property
    def d(self) -> int:
        return len(self.seeds)

    def update(self, upd: StreamUpdate) -> None:
        i, delta = upd
        if not 0 <= i < self.u:
            raise IndexError(f"index {i} outside universe [0, {self.u})")
        self.root = (self.root + F.reduce(delta) * _leaf_weight(i, self.seeds)) % F.P

    def state_elements(self) -> int:
        return self.d + 1


def root_hash_update(acc: TreeHashAccumulator, upd: StreamUpdate) -> TreeHashAccumulator:
    acc.update(upd)
    return acc


def tree_levels(vector: Sequence[int], seeds: Sequence[int], modified: bool = False) -> list[list[int]]:
    """Every level of the tree, bottom up, built naively (test oracle).

    ``modified`` uses (1 - r_j) * left + r_j * right, whose root is the LDE.
    """
    level = [F.reduce(v) for v in vector]
    if len(level) != 1 << len(seeds):
        raise ValueError("vector length must be 2^len(seeds)")
    levels = [level]
    for r in seeds:
        if modified:
            level = [F.add(F.mul(F.sub(1, r), level[2 * m]), F.mul(r, level[2 * m + 1]))
                     for m in range(len(level) // 2)]
        else:
            level = [F.add(level[2 * m], F.mul(r, level[2 * m + 1])) for m in range(len(level) // 2)]
        levels.append(level)
    return levels


def needed_siblings(qL: int, qR: int, j: int) -> tuple[Optional[int], Optional[int]]:
    """Level-j node ids the verifier must be given to pair up its span."""
    lo, hi = qL >> j, qR >> j
    return (lo - 1 if lo & 1 else None), (hi + 1 if not hi & 1 else None)


def reconstruct_level(start: int, hashes: Sequence[int], left: Optional[int],
                      right: Optional[int], r: int) -> tuple[int, list[int]]:
    """Pair up a contiguous span of level-j hashes into level j+1."""
    span = list(hashes)
    if start & 1:
        if left is None:
            raise ValueError("span starts on a right child; left sibling required")
        span.insert(0, left)
        start -= 1
    if len(span) & 1:
        if right is None:
            raise ValueError("span ends on a left child; right sibling required")
        span.append(right)
    return start >> 1, [F.add(span[2 * m], F.mul(r, span[2 * m + 1])) for m in range(len(span) // 2)]


class HashTree:
    """The prover's copy of the tree, advanced one level per revealed seed."""

    def __init__(self, vec: FrequencyVector, u: int, dense_threshold: int = DENSE_THRESHOLD):
        self.dense = u <= dense_threshold
        if self.dense:
            self.level = vec.to_field_array(u)
        else:
            self.level = {i: F.reduce(v) for i, v in vec.nonzero()}
        self.j = 0

    def get(self, m: int) -> int:
        if self.dense:
            return int(self.level[m])
        return self.level.get(m, 0)

    def advance(self, r: int) -> None:
        if self.dense:
            self.level = K.tree_fold(self.level, np.uint64(r))
        else:
            out: dict[int, int] = {}
            for m, h in self.level.items():
                out[m >> 1] = (out.get(m >> 1, 0) + (h * r if m & 1 else h)) % F.P
            self.level = {m: h for m, h in out.items() if h}
        self.j += 1


def prover_subvector_message(vector: Sequence[int], j: int, qL: int, qR: int,
                             seeds: Sequence[int]) -> list[int]:
    """Level-j sibling hashes for [qL, qR], computed from scratch."""
    d = (len(vector) - 1).bit_length()
    if len(vector) != 1 << d or not 1 <= j < max(d, 1) or len(seeds) < j:
        raise ValueError("bad round or seed count")
    level = [F.reduce(v) for v in vector]
    for r in seeds[:j]:
        level = [F.add(level[2 * m], F.mul(r, level[2 * m + 1])) for m in range(len(level) // 2)]
    return [level[m] for m in needed_siblings(qL, qR, j) if m is not None]


class SubvectorProver(Prover):
    def __init__(self, vec: FrequencyVector, u: int, qL: int, qR: int,
                 dense_threshold: int = DENSE_THRESHOLD):
        if not 0 <= qL <= qR < u:
            raise ProtocolError(f"range [{qL}, {qR}] outside universe [0, {u})")
        self.vec = vec
        self.tree = HashTree(vec, u, dense_threshold)
        self.qL, self.qR = qL, qR
        self.d = (u - 1).bit_length()
        self._sent = 0

    def answer(self) -> list[int]:
        entries = [(i, v) for i, v in self.vec.nonzero() if self.qL <= i <= self.qR]
        out = [len(entries)]
        for i, v in entries:
            out += [i, F.reduce(v)]
        out += [self.tree.get(m) for m in needed_siblings(self.qL, self.qR, 0) if m is not None]
        return out

    def respond(self, payload):
        if self._sent == 0:
            self._sent = 1
            return self.answer()
        if len(payload) != 1:
            raise ProtocolError("expected a single seed")
        self.tree.advance(payload[0])
        j = self._sent
        self._sent += 1
        return [self.tree.get(m) for m in needed_siblings(self.qL, self.qR, j) if m is not None]

    @property
    def done(self) -> bool:
        return self._sent >= self.d


class SubvectorVerifier(Verifier):
    """Accepts iff the reported entries and siblings rebuild the streamed root.

    The reconstruction is linear, so the verifier keeps one running sum t'
    (plus the seeds and t) rather than any level of the tree. ``max_entries``
    rejects an oversize answer before any seed is revealed.
    """

    protocol = "subvector"

    def __init__(self, acc: TreeHashAccumulator, qL: int, qR: int,
                 query: Sequence[int], max_entries: Optional[int] = None):
        super().__init__()
        if not 0 <= qL <= qR < acc.u:
            raise ValueError(f"range [{qL}, {qR}] outside universe [0, {acc.u})")
        self.seeds = acc.seeds
        self.root = acc.root
        self.qL, self.qR = qL, qR
        self.max_entries = max_entries
        self._query = list(query)
        self.partial = 0
        self.round = 0
        self.entries: list[tuple[int, int]] = []

    @property
    def d(self) -> int:
        return len(self.seeds)

    def query(self):
        return list(self._query)

    def _add_node(self, j: int, m: int, h: int) -> None:
        self.partial = (self.partial + h * _leaf_weight(m, self.seeds, j)) % F.P

    def _siblings(self, j: int, payload: Sequence[int]) -> None:
        ids = [m for m in needed_siblings(self.qL, self.qR, j) if m is not None]
        expect(len(payload) == len(ids),
               f"level {j}: expected {len(ids)} sibling hash(es), got {len(payload)}")
        for m, h in zip(ids, payload):
            expect(0 <= h < F.P, "non-canonical field element")
            self._add_node(j, m, h)

    def receive(self, payload):
        expect(all(0 <= v < F.P for v in payload), "non-canonical field element")
        if self.round == 0:
            expect(len(payload) >= 1, "empty answer")
            k = payload[0]
            room = self.qR - self.qL + 1
            expect(k <= room, f"answer claims {k} entries in a range of {room}")
            if self.max_entries is not None:
                expect(k <= self.max_entries, f"answer has {k} entries, guard allows {self.max_entries}")
            expect(len(payload) >= 1 + 2 * k, "answer shorter than its entry count")
            prev = self.qL - 1
            for e in range(k):
                i, v = payload[1 + 2 * e], payload[2 + 2 * e]
                expect(prev < i <= self.qR, "entries out of range or out of order")
                expect(v != 0, "zero entry listed")
                prev = i
                self._add_node(0, i, v)
                self.entries.append((i, v))
            self._siblings(0, payload[1 + 2 * k:])
        else:
            self._siblings(self.round, payload)
        self.round += 1
        if self.round < self.d:
            return [self.seeds[self.round - 1]]
        expect(self.partial == self.root, "reconstructed root does not match the streamed root")
        self._finish([(i, F.to_signed(v)) for i, v in self.entries])
        return None

    def state_elements(self) -> int:
        # seeds, t, t', and the two range endpoints
        return self.d + 4


# -- reporting queries -------------------------------------------------------------

class ClaimVerifier(Verifier):
    """First phase of a reduction: the prover names a location (or two)."""

    protocol = "claim"

    def __init__(self, query: Sequence[int], width: int):
        super().__init__()
        self._query = list(query)
        self.width = width

    def query(self):
        return list(self._query)

    def receive(self, payload):
        expect(len(payload) == self.width, f"claim must have {self.width} element(s)")
        self._finish(tuple(payload))
        return None

    def state_elements(self) -> int:
        return self.width


class ReductionVerifier(PhasedVerifier):
    """Claim phase followed by a sub-vector check over a claim-derived range.

    ``plan(claim)`` returns (qL, qR) or raises Rejected; ``judge(claim,
    entries)`` turns the verified entries into the result or raises Rejected.
    """

    def __init__(self, acc: TreeHashAccumulator, query: Sequence[int], width: int,
                 plan, judge, subquery_code: int):
        super().__init__(ClaimVerifier(query, width))
        self.acc = acc
        self.plan = plan
        self.judge = judge
        self.subquery_code = subquery_code
        self.claim: tuple[int, ...] | None = None

    def next_phase(self, done):
        if isinstance(done, ClaimVerifier):
            self.claim = done.result
            qL, qR = self.plan(self.claim)
            return SubvectorVerifier(self.acc, qL, qR, [self.subquery_code, qL, qR])
        return None

    def final_result(self):
        return self.judge(self.claim, self.phase.result)

    def extra_state_elements(self) -> int:
        # the tree sketch waits during the claim phase; afterwards the claim
        # is one of the sub-vector range endpoints
        if isinstance(self.phase, ClaimVerifier):
            return self.acc.state_elements()
        return 0


def predecessor_plan(q: int, u: int):
    def plan(claim):
        (qp,) = claim
        expect(qp <= q, f"claimed predecessor {qp} exceeds the query {q}")
        return qp, q
    return plan


def successor_plan(q: int, u: int):
    def plan(claim):
        (qs,) = claim
        expect(q <= qs < u, f"claimed successor {qs} outside [{q}, {u})")
        return q, qs
    return plan


def single_at(target_of):
    """Judge for predecessor/successor: the range holds exactly one present key."""
    def judge(claim, entries):
        target = target_of(claim)
        expect(len(entries) == 1 and entries[0][0] == target,
               f"range must contain exactly one present key, at {target}")
        expect(entries[0][1] > 0, "claimed key has non-positive count")
        return target
    return judge


def klargest_plan(u: int):
    def plan(claim):
        (j,) = claim
        expect(j < u, "claimed location outside the universe")
        return j, u - 1
    return plan


def klargest_judge(k: int):
    def judge(claim, entries):
        (j,) = claim
        expect(all(v > 0 for _, v in entries), "non-positive count in range")
        if len(entries) < k:
            expect(j == 0, f"only {len(entries)} keys above a nonzero cut")
        else:
            expect(len(entries) == k, f"range holds {len(entries)} keys, expected {k}")
            expect(entries[0][0] == j, f"claimed cut {j} is not a present key")
        return entries
    return judge


class ClaimProver(Prover):
    def __init__(self, claim: Sequence[int]):
        self.claim = list(claim)
        self._sent = False

    def respond(self, payload):
        self._sent = True
        return list(self.claim)

    @property
    def done(self) -> bool:
        return self._sent


def honest_predecessor(vec: FrequencyVector, q: int) -> int:
    present = [i for i, v in vec.nonzero() if i <= q]
    if not present:
        raise ProtocolError(f"no key <= {q} in the stream (0 must always be present)")
    return present[-1]


def honest_successor(vec: FrequencyVector, q: int) -> int:
    present = [i for i, v in vec.nonzero() if i >= q]
    if not present:
        raise ProtocolError(f"no key >= {q} in the stream")
    return present[0]


def honest_klargest_cut(vec: FrequencyVector, k: int) -> int:
    keys = [i for i, _ in vec.nonzero()]
    if len(keys) < k:
        return 0
    return keys[-k]


def dictionary_updates(pairs: Sequence[tuple[int, int]]) -> list[StreamUpdate]:
    """Ingest (key, value) pairs with the +1 offset that marks presence."""
    out = []
    for key, value in pairs:
        if value < 0:
            raise ValueError("dictionary values must be nonnegative")
        out.append(StreamUpdate(key, value + 1))
    return out


def decode_dictionary(value: int) -> Optional[int]:
    return None if value == 0 else value - 1
