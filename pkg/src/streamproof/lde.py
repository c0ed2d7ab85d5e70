"""Low-degree extension of the frequency vector and its streaming evaluation.

Index i maps to the digit vector v(i) in [ell]^d, least significant digit
first, so variable x_1 carries the lowest digit. The accumulator keeps
exactly the point r and the running value f_a(r).
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from . import field as F
from .stream import StreamUpdate, universe_params


@dataclass(frozen=True)
class LdeParams:
    ell: int
    d: int
    u: int

    def __post_init__(self):
        if self.ell < 2 or self.d < 1 or self.ell ** self.d != self.u:
            raise ValueError(f"inconsistent LDE parameters ell={self.ell} d={self.d} u={self.u}")

    @classmethod
    def for_universe(cls, u: int, ell: int = 2) -> "LdeParams":
        size, d = universe_params(u, ell)
        return cls(ell, d, size)

    def digits(self, i: int) -> list[int]:
        if not 0 <= i < self.u:
            raise IndexError(f"index {i} outside universe [0, {self.u})")
        out = []
        for _ in range(self.d):
            i, digit = divmod(i, self.ell)
            out.append(digit)
        return out


def random_point(d: int, rng: random.Random) -> tuple[int, ...]:
    return tuple(rng.randrange(F.P) for _ in range(d))


@lru_cache(maxsize=64)
def _chi_denominators(ell: int) -> tuple[int, ...]:
    dens = []
    for k in range(ell):
        den = 1
        for m in range(ell):
            if m != k:
                den = F.mul(den, F.reduce(k - m))
        dens.append(den)
    return tuple(F.batch_inv(dens))


def chi_scalar(k: int, x: int, ell: int = 2) -> int:
    """Lagrange basis chi_k on nodes 0..ell-1, evaluated at x."""
    if not 0 <= k < ell:
        raise ValueError(f"digit {k} outside [0, {ell})")
    x = F.reduce(x)
    if ell == 2:
        return x if k else F.sub(1, x)
    num = 1
    for m in range(ell):
        if m != k:
            num = F.mul(num, F.sub(x, m))
    return F.mul(num, _chi_denominators(ell)[k])


def chi_point(v: Sequence[int], r: Sequence[int], ell: int = 2) -> int:
    if len(v) != len(r):
        raise ValueError(f"dimension mismatch: |v|={len(v)}, |r|={len(r)}")
    out = 1
    if ell == 2:
        for vj, rj in zip(v, r):
            out = F.mul(out, rj if vj else F.sub(1, rj))
        return out
    for vj, rj in zip(v, r):
        out = F.mul(out, chi_scalar(vj, rj, ell))
    return out


def chi_index(i: int, r: Sequence[int], ell: int = 2) -> int:
    """chi_{v(i)}(r) without materialising the digit vector (ell = 2 fast path)."""
    if ell != 2:
        return chi_point(LdeParams(ell, len(r), ell ** len(r)).digits(i), r, ell)
    out = 1
    for rj in r:
        out = out * (rj if i & 1 else 1 - rj + F.P) % F.P
        i >>= 1
    if i:
        raise IndexError("index outside universe")
    return out


def chi_matrix(ell: int, npts: int) -> np.ndarray:
    """Rows c = 0..npts-1, columns k: chi_k(c); used by the prover kernels."""
    return np.array([[chi_scalar(k, c, ell) for k in range(ell)] for c in range(npts)],
                    dtype=np.uint64)


@dataclass
class LdeAccumulator:
    """Streaming f_a(r): d point coordinates plus one running value."""

    params: LdeParams
    point: tuple[int, ...]
    acc: int = 0

    def __post_init__(self):
        if len(self.point) != self.params.d:
            raise ValueError("evaluation point has wrong dimension")

    @classmethod
    def draw(cls, params: LdeParams, rng: random.Random) -> "LdeAccumulator":
        return cls(params, random_point(params.d, rng))

    def update(self, upd: StreamUpdate) -> None:
        i, delta = upd
        if not 0 <= i < self.params.u:
            raise IndexError(f"index {i} outside universe [0, {self.params.u})")
        self.acc = (self.acc + F.reduce(delta) * chi_index(i, self.point, self.params.ell)) % F.P

    def extend(self, updates: Iterable[StreamUpdate]) -> "LdeAccumulator":
        for upd in updates:
            self.update(upd)
        return self

    @property
    def value(self) -> int:
        return self.acc

    def state_elements(self) -> int:
        return len(self.point) + 1


def lde_direct_eval(a: Sequence[int], r: Sequence[int], ell: int = 2) -> int:
    """Brute force sum_v a_v chi_v(r) over the whole grid (oracle)."""
    params = LdeParams(ell, len(r), ell ** len(r))
    if len(a) > params.u:
        raise ValueError("vector longer than the universe")
    total = 0
    for i, ai in enumerate(a):
        if ai:
            total = F.add(total, F.mul(F.reduce(ai), chi_point(params.digits(i), r, ell)))
    return total


def lde_eval_dense(table: np.ndarray, r: Sequence[int], ell: int = 2) -> int:
    """f_a(r) by folding a dense canonical table one variable at a time."""
    cur = table
    for rj in r:
        cur = K.fold(cur, np.array([chi_scalar(k, rj, ell) for k in range(ell)], dtype=np.uint64))
    return int(cur[0])


def dyadic_blocks(qL: int, qR: int) -> list[tuple[int, int]]:
    """Canonical cover of [qL, qR] by blocks (level j, block index m)."""
    if qL > qR:
        raise ValueError(f"empty range [{qL}, {qR}]")
    blocks = []
    lo, hi, j = qL, qR + 1, 0
    while lo < hi:
        if lo & 1:
            blocks.append((j, lo))
            lo += 1
        if hi & 1:
            hi -= 1
            blocks.append((j, hi))
        lo >>= 1
        hi >>= 1
        j += 1
    return blocks


def range_indicator_eval(qL: int, qR: int, r: Sequence[int]) -> int:
    """f_b(r) for b the 0/1 indicator of [qL, qR]; O(log^2 u) work.

    A block at level j fixes digits j+1..d, and the free low digits sum to 1.
    """
    d = len(r)
    if not 0 <= qL <= qR < 1 << d:
        raise ValueError(f"range [{qL}, {qR}] invalid for universe 2^{d}")
    total = 0
    for j, m in dyadic_blocks(qL, qR):
        total = F.add(total, chi_index(m, r[j:]))
    return total
