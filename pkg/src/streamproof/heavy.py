"""Heavy hitters over a count-augmented hash tree.

Every node carries a hash and its subtree count c. A level-j parent of
(left, right) hashes to

    h_L + h_R * r_j + c_L * r_j^2 + c_R * r_j^3

so both children's counts are bound individually. (Binding only the
parent's own count c_L + c_R would let a prover move mass between two
light siblings and hide a heavy node under them.) Leaves have hash = count.

A node is heavy when its count is at least tau. For levels j = 0..d-1 the
prover lists S_j, the children of heavy level-(j+1) nodes, in increasing
order. Leaves go as (i, count). Higher up a heavy node goes as (w, 1) and
the verifier rebuilds it from its children in S_{j-1}; a light node goes as
(w, 0, hash, count) with count < tau, and serves as the witness that nothing
heavy hides below it. Seeds r_j are revealed level by level, and the
top pair must hash to the streamed root.

In the fingerprinted variant the verifier forgets S_{j-1} and keeps only
sum_m (h_m + c_m z) s^m over it; a heavy entry then carries its two
children again, (w, 1, h_L, c_L, h_R, c_R), and the replayed children must
reproduce the stored fingerprint.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels as K
from . import field as F
from .protocol import Prover, ProtocolError, Rejected, Verifier, expect
from .stream import FrequencyVector, StreamUpdate

DENSE_THRESHOLD = 1 << 26


def heavy_threshold(phi, n: int) -> int:
    """Smallest integer count that is >= phi * n (at least 1)."""
    phi = Fraction(phi)
    if not 0 < phi <= 1:
        raise ValueError("phi must lie in (0, 1]")
    return max(1, math.ceil(phi * n))


def parent_hash(hl: int, hr: int, cl: int, cr: int, r: int) -> int:
    r2 = r * r % F.P
    return (hl + hr * r + cl * r2 + cr * r2 * r) % F.P


class AugmentedTreeAccumulator:
    """Streaming root of the augmented tree: O(d) field operations per update."""

    def __init__(self, seeds: Sequence[int]):
        if not seeds:
            raise ValueError("need at least one tree level")
        self.seeds = tuple(seeds)
        self.u = 1 << len(seeds)
        self._sq = tuple(r * r % F.P for r in seeds)
        self._cube = tuple(s * r % F.P for s, r in zip(self._sq, seeds))
        self.root = 0

    @property
    def d(self) -> int:
        return len(self.seeds)

    def leaf_weight(self, i: int) -> int:
        # W_j: multiplier from the level-j ancestor's hash to the root
        w = 1
        total = 0
        for j in range(self.d, 0, -1):
            bit = (i >> (j - 1)) & 1
            total = (total + w * (self._cube[j - 1] if bit else self._sq[j - 1])) % F.P
            if bit:
                w = w * self.seeds[j - 1] % F.P
        return (total + w) % F.P

    def update(self, upd: StreamUpdate) -> None:
        i, delta = upd
        if not 0 <= i < self.u:
            raise IndexError(f"index {i} outside universe [0, {self.u})")
        self.root = (self.root + F.reduce(delta) * self.leaf_weight(i)) % F.P

    def state_elements(self) -> int:
        return self.d + 1


def augmented_root_update(acc: AugmentedTreeAccumulator, upd: StreamUpdate) -> AugmentedTreeAccumulator:
    acc.update(upd)
    return acc


def augmented_levels(vector: Sequence[int], seeds: Sequence[int]) -> list[list[tuple[int, int]]]:
    """(hash, count) for every node, bottom up, built naively (test oracle)."""
    level = [(F.reduce(v), v) for v in vector]
    if len(level) != 1 << len(seeds):
        raise ValueError("vector length must be 2^len(seeds)")
    out = [level]
    for r in seeds:
        level = [(parent_hash(level[2 * m][0], level[2 * m + 1][0],
                              F.reduce(level[2 * m][1]), F.reduce(level[2 * m + 1][1]), r),
                  level[2 * m][1] + level[2 * m + 1][1])
                 for m in range(len(level) // 2)]
        out.append(level)
    return out


# -- prover ------------------------------------------------------------------------

class HeavyHittersProver(Prover):
    def __init__(self, vec: FrequencyVector, u: int, tau: int, fingerprinted: bool,
                 dense_threshold: int = DENSE_THRESHOLD):
        if tau < 1:
            raise ProtocolError("heavy threshold must be positive")
        if any(v < 0 for _, v in vec.nonzero()):
            raise ProtocolError("heavy hitters need nonnegative frequencies")
        self.u = u
        self.d = (u - 1).bit_length()
        self.tau = tau
        self.fingerprinted = fingerprinted
        self.dense = u <= dense_threshold
        self.n = vec.total()
        # counts per level do not depend on the seeds; S_j is fixed up front
        self.members = self._witness_sets(vec)
        if self.dense:
            self.hashes = vec.to_field_array(u)
            self.counts = vec.to_count_array(u)
        else:
            self.hashes = {i: F.reduce(v) for i, v in vec.nonzero()}
            self.counts = dict(vec.nonzero())
        self.prev: tuple | None = None
        self._sent = 0

    def _witness_sets(self, vec: FrequencyVector) -> list[list[int]]:
        levels: list[dict[int, int]] = [dict(vec.nonzero())]
        for _ in range(self.d):
            up: dict[int, int] = {}
            for m, c in levels[-1].items():
                up[m >> 1] = up.get(m >> 1, 0) + c
            levels.append(up)
        members: list[list[int]] = [[] for _ in range(self.d)]
        if self.n < self.tau:
            return members
        heavy_above = [0]
        for j in range(self.d - 1, -1, -1):
            ids = sorted(c for w in heavy_above for c in (2 * w, 2 * w + 1))
            members[j] = ids
            heavy_above = [m for m in ids if levels[j].get(m, 0) >= self.tau]
        return members

    def _get(self, table, m: int) -> int:
        if self.dense:
            return int(table[m])
        return table.get(m, 0)

    def _advance(self, r: int) -> None:
        self.prev = (self.hashes, self.counts)
        if self.dense:
            self.hashes, self.counts = K.augmented_fold(self.hashes, self.counts, np.uint64(r))
            return
        hashes: dict[int, int] = {}
        counts: dict[int, int] = {}
        for w in {m >> 1 for m in self.counts} | {m >> 1 for m in self.hashes}:
            hl, hr = self.hashes.get(2 * w, 0), self.hashes.get(2 * w + 1, 0)
            cl, cr = self.counts.get(2 * w, 0), self.counts.get(2 * w + 1, 0)
            hashes[w] = parent_hash(hl, hr, F.reduce(cl), F.reduce(cr), r)
            counts[w] = cl + cr
        self.hashes, self.counts = hashes, counts

    def level_message(self, j: int) -> list[int]:
        ids = self.members[j] if j < self.d else []
        out: list[int] = []
        if j == 0:
            for i in ids:
                out += [i, F.reduce(self._get(self.counts, i))]
            return out
        ph, pc = self.prev
        for w in ids:
            c = self._get(self.counts, w)
            if c >= self.tau:
                out += [w, 1]
                if self.fingerprinted:
                    out += [self._get(ph, 2 * w), F.reduce(self._get(pc, 2 * w)),
                            self._get(ph, 2 * w + 1), F.reduce(self._get(pc, 2 * w + 1))]
            else:
                out += [w, 0, self._get(self.hashes, w), F.reduce(c)]
        return out

    def respond(self, payload):
        if self._sent:
            if len(payload) != 1:
                raise ProtocolError("expected a single seed")
            self._advance(payload[0])
        msg = self.level_message(self._sent)
        self._sent += 1
        return msg

    @property
    def done(self) -> bool:
        return self._sent >= (1 if self.n < self.tau else self.d)


# -- verifier ----------------------------------------------------------------------

class HeavyHittersVerifier(Verifier):
    """Checks the witness sets level by level against the streamed root.

    ``on_heavy(i, count)`` is called for each verified heavy leaf as soon as
    it is read (frequency statistics use it to strip heavy items).
    """

    protocol = "heavy-hitters"

    def __init__(self, acc: AugmentedTreeAccumulator, n: int, tau: int, query: Sequence[int],
                 fingerprinted: bool = False, fp_key: tuple[int, int] = (0, 0),
                 on_heavy: Optional[Callable[[int, int], None]] = None):
        super().__init__()
        if tau < 1:
            raise ValueError("heavy threshold must be positive")
        if fingerprinted and not all(fp_key):
            raise ValueError("fingerprinted mode needs a nonzero key (s, z)")
        self.seeds = acc.seeds
        self.root = acc.root
        self.n = n
        self.tau = tau
        self.fingerprinted = fingerprinted
        self.s, self.z = fp_key
        self.on_heavy = on_heavy
        self._query = list(query)
        self.level = 0
        self.items: list[tuple[int, int]] = []
        # verbose: S_{j-1} as {id: (hash, count)}; fingerprinted: its fingerprint
        self.stored: dict[int, tuple[int, int]] = {}
        self.fp_prev = 0
        self._peak_stored = 0

    @property
    def d(self) -> int:
        return len(self.seeds)

    def query(self):
        return list(self._query)

    def _fp_term(self, m: int, h: int, c: int) -> int:
        return (h + c * self.z) * pow(self.s, m, F.P) % F.P

    def _children(self, w: int, extra: Sequence[int]) -> tuple[int, int, int, int]:
        if self.fingerprinted:
            return extra[0], extra[1], extra[2], extra[3]
        left = self.stored.pop(2 * w, None)
        right = self.stored.pop(2 * w + 1, None)
        expect(left is not None and right is not None,
               f"level {self.level}: heavy node {w} has no listed children")
        return left[0], left[1], right[0], right[1]

    def _parse(self, payload: Sequence[int]) -> list[tuple[int, int, int]]:
        """Nodes of S_j as (id, hash, count), checking replay and thresholds."""
        j = self.level
        expect(all(0 <= v < F.P for v in payload), "non-canonical field element")
        nodes = []
        if j == 0:
            expect(len(payload) % 2 == 0, "leaf list must be (index, count) pairs")
            for k in range(0, len(payload), 2):
                i, c = payload[k], payload[k + 1]
                nodes.append((i, c, c))
            return nodes
        r = self.seeds[j - 1]
        replay = 0
        pos = 0
        width = 6 if self.fingerprinted else 2
        while pos < len(payload):
            expect(pos + 2 <= len(payload), "truncated node entry")
            w, flag = payload[pos], payload[pos + 1]
            if flag == 1:
                expect(pos + width <= len(payload), "truncated heavy entry")
                hl, cl, hr, cr = self._children(w, payload[pos + 2:pos + width])
                if self.fingerprinted:
                    replay = (replay + self._fp_term(2 * w, hl, cl) + self._fp_term(2 * w + 1, hr, cr)) % F.P
                c = cl + cr
                expect(c >= self.tau, f"level {j}: node {w} listed heavy with count {c} < {self.tau}")
                nodes.append((w, parent_hash(hl, hr, cl % F.P, cr % F.P, r), c))
                pos += width
            elif flag == 0:
                expect(pos + 4 <= len(payload), "truncated light entry")
                h, c = payload[pos + 2], payload[pos + 3]
                expect(c < self.tau, f"level {j}: witness {w} has count {c} >= {self.tau}")
                nodes.append((w, h, c))
                pos += 4
            else:
                raise Rejected(f"level {j}: bad node flag {flag}")
        if self.fingerprinted:
            expect(replay == self.fp_prev, f"level {j}: replayed children do not match level {j - 1}")
        else:
            expect(not self.stored, f"level {j}: {len(self.stored)} listed node(s) of level {j - 1} unused")
        return nodes

    def _check_pairs(self, nodes: list[tuple[int, int, int]]) -> None:
        j = self.level
        expect(len(nodes) % 2 == 0, f"level {j}: odd number of listed nodes")
        prev = -1
        limit = 1 << (self.d - j)
        for k in range(0, len(nodes), 2):
            (a, _, ca), (b, _, cb) = nodes[k], nodes[k + 1]
            expect(a > prev and a % 2 == 0 and b == a + 1 and b < limit,
                   f"level {j}: nodes must come as sorted sibling pairs")
            expect(ca + cb >= self.tau, f"level {j}: pair {a},{b} has a light parent")
            prev = b

    def receive(self, payload):
        j = self.level
        if j == 0 and self.n < self.tau:
            expect(not payload, "items listed although the stream total is below the threshold")
            self._finish([])
            return None
        nodes = self._parse(payload)
        self._check_pairs(nodes)
        if j == 0:
            for i, _, c in nodes:
                if c >= self.tau:
                    self.items.append((i, c))
                    if self.on_heavy is not None:
                        self.on_heavy(i, c)
        if j == self.d - 1:
            expect([m for m, _, _ in nodes] == [0, 1], "top level must list exactly the root's children")
            (_, h0, c0), (_, h1, c1) = nodes
            expect(c0 + c1 == self.n, "subtree counts do not add up to the stream total")
            expect(parent_hash(h0, h1, c0 % F.P, c1 % F.P, self.seeds[-1]) == self.root,
                   "reconstructed root does not match the streamed root")
            self._finish(list(self.items))
            return None
        if self.fingerprinted:
            self.fp_prev = sum(self._fp_term(m, h, c) for m, h, c in nodes) % F.P
        else:
            self.stored = {m: (h, c) for m, h, c in nodes}
            self._peak_stored = max(self._peak_stored, len(self.stored))
        self.level += 1
        return [self.seeds[j]]

    def state_elements(self) -> int:
        base = self.d + 3  # seeds, root, n, tau
        if self.fingerprinted:
            # s, z, stored, replayed and next-level fingerprints, pair buffer (3)
            return base + 8
        return base + 3 * len(self.stored)

