"""Arithmetic in Z_p for the Mersenne prime p = 2^61 - 1.

Scalars are plain Python ints kept canonical in [0, p). The prover's hot
loops use the ``v*`` helpers, which operate on numpy ``uint64`` arrays and
never overflow: products are split into 32-bit limbs and folded with
2^61 = 1 (mod p).

:class:`PrimeField` is a slow generic variant for small toy primes, used by
tests that enumerate a whole field.
"""

from __future__ import annotations

import struct
from typing import Iterable, Sequence

import numpy as np

P = (1 << 61) - 1
ELEMENT_BYTES = 8

_U64 = np.uint64
_P64 = _U64(P)
_M32 = _U64(0xFFFFFFFF)
_M29 = _U64((1 << 29) - 1)


def reduce(x: int) -> int:
    """Map any integer (including negative deltas) to its canonical residue."""
    if 0 <= x < P:
        return x
    if 0 <= x < 1 << 122:
        x = (x >> 61) + (x & P)
        x = (x >> 61) + (x & P)
        return x - P if x >= P else x
    return x % P


def add(a: int, b: int) -> int:
    s = a + b
    return s - P if s >= P else s


def sub(a: int, b: int) -> int:
    s = a - b
    return s + P if s < 0 else s


def neg(a: int) -> int:
    return P - a if a else 0


def mul(a: int, b: int) -> int:
    x = a * b
    x = (x >> 61) + (x & P)
    return x - P if x >= P else x


def power(a: int, e: int) -> int:
    """a**e by square-and-multiply."""
    if e < 0:
        raise ValueError("negative exponent")
    result = 1
    base = a
    while e:
        if e & 1:
            result = mul(result, base)
        base = mul(base, base)
        e >>= 1
    return result


def inv(a: int) -> int:
    """Multiplicative inverse via Fermat, a^(p-2)."""
    if a % P == 0:
        raise ZeroDivisionError("zero has no inverse in Z_p")
    return power(a, P - 2)


def batch_inv(values: Sequence[int]) -> list[int]:
    """Montgomery's trick: one exponentiation for the whole batch."""
    prefix = [1] * (len(values) + 1)
    for i, v in enumerate(values):
        if v == 0:
            raise ZeroDivisionError("zero has no inverse in Z_p")
        prefix[i + 1] = mul(prefix[i], v)
    acc = inv(prefix[-1])
    out = [0] * len(values)
    for i in range(len(values) - 1, -1, -1):
        out[i] = mul(acc, prefix[i])
        acc = mul(acc, values[i])
    return out


def to_signed(a: int) -> int:
    """Interpret a residue as a signed integer in (-p/2, p/2]."""
    return a - P if a > P // 2 else a


class PrimeField:
    """Generic Z_q with the same scalar API; meant for small test primes."""

    def __init__(self, q: int):
        if q < 2:
            raise ValueError("modulus must be at least 2")
        self.q = q

    def reduce(self, x: int) -> int:
        return x % self.q

    def add(self, a: int, b: int) -> int:
        return (a + b) % self.q

    def sub(self, a: int, b: int) -> int:
        return (a - b) % self.q

    def neg(self, a: int) -> int:
        return (-a) % self.q

    def mul(self, a: int, b: int) -> int:
        return (a * b) % self.q

    def power(self, a: int, e: int) -> int:
        return pow(a, e, self.q)

    def inv(self, a: int) -> int:
        if a % self.q == 0:
            raise ZeroDivisionError("zero has no inverse")
        return pow(a, self.q - 2, self.q)

    def __repr__(self) -> str:
        return f"PrimeField({self.q})"


GF61 = PrimeField(P)


# -- serialization -----------------------------------------------------------

def encode_elements(values: Iterable[int]) -> bytes:
    values = list(values)
    return struct.pack(f"<{len(values)}Q", *values)


def decode_elements(data: bytes) -> list[int]:
    if len(data) % ELEMENT_BYTES:
        raise ValueError(f"element buffer length {len(data)} is not a multiple of 8")
    return list(struct.unpack(f"<{len(data) // ELEMENT_BYTES}Q", data))


# -- vectorised arithmetic ---------------------------------------------------

def to_array(values) -> np.ndarray:
    """Canonical uint64 array from ints (negatives allowed)."""
    arr = np.asarray(values)
    if arr.dtype == np.uint64:
        out = arr.copy()
        out[out >= _P64] -= _P64
        return out
    if arr.dtype.kind in "iu" and arr.dtype.itemsize <= 8:
        a = arr.astype(np.int64)
        return np.mod(a, np.int64(P)).astype(np.uint64)
    return np.array([reduce(int(v)) for v in arr.ravel()], dtype=np.uint64).reshape(arr.shape)


def _fold(x: np.ndarray) -> np.ndarray:
    # x < 2^64 -> canonical
    x = (x >> _U64(61)) + (x & _P64)
    x -= _P64 * (x >= _P64)
    return x


def vadd(a, b) -> np.ndarray:
    s = a + b
    s -= _P64 * (s >= _P64)
    return s


def vsub(a, b) -> np.ndarray:
    return vadd(a, _P64 - np.asarray(b, dtype=np.uint64))


def vmul(a, b) -> np.ndarray:
    """Elementwise a*b mod p for canonical uint64 operands (arrays or scalars)."""
    a = np.asarray(a, dtype=np.uint64)
    b = np.asarray(b, dtype=np.uint64)
    ah, al = a >> _U64(32), a & _M32
    bh, bl = b >> _U64(32), b & _M32
    mid = ah * bl + al * bh  # < 2^62
    lo = al * bl  # < 2^64
    r = (ah * bh) << _U64(3)  # 2^64 = 8 (mod p)
    r += (mid >> _U64(29)) + ((mid & _M29) << _U64(32))
    r += (lo >> _U64(61)) + (lo & _P64)
    return _fold(r)


def vsum(a: np.ndarray) -> int:
    """Sum of a canonical uint64 array, reduced mod p (exact for < 2^32 terms)."""
    if a.size == 0:
        return 0
    hi = int((a >> _U64(32)).sum(dtype=np.uint64))
    lo = int((a & _M32).sum(dtype=np.uint64))
    return reduce((hi << 32) + lo)


def vpow(a: np.ndarray, e: int) -> np.ndarray:
    result = np.ones_like(a)
    base = a
    while e:
        if e & 1:
            result = vmul(result, base)
        e >>= 1
        if e:
            base = vmul(base, base)
    return result
