"""Compiled inner loops for the dense prover tables.

All arrays are canonical uint64 residues mod 2^61 - 1. The chi matrices hold
chi_k(c) for c = 0..deg (rows) and digits k = 0..ell-1 (columns), so every
kernel works for any branching factor.
"""

import numba
import numpy as np

_P = np.uint64((1 << 61) - 1)


@numba.njit(cache=True, inline="always")
def mulmod(a, b):
    m32 = np.uint64(0xFFFFFFFF)
    p = np.uint64((1 << 61) - 1)
    ah = a >> np.uint64(32)
    al = a & m32
    bh = b >> np.uint64(32)
    bl = b & m32
    mid = ah * bl + al * bh
    lo = al * bl
    r = (ah * bh) << np.uint64(3)
    r += (mid >> np.uint64(29)) + ((mid & np.uint64(0x1FFFFFFF)) << np.uint64(32))
    r += (lo >> np.uint64(61)) + (lo & p)
    r = (r >> np.uint64(61)) + (r & p)
    if r >= p:
        r -= p
    return r


@numba.njit(cache=True, inline="always")
def addmod(a, b):
    s = a + b
    if s >= np.uint64((1 << 61) - 1):
        s -= np.uint64((1 << 61) - 1)
    return s


@numba.njit(cache=True)
def vmul(a, b):
    out = np.empty_like(a)
    for i in range(a.size):
        out[i] = mulmod(a[i], b[i])
    return out


@numba.njit(cache=True)
def fold(table, weights):
    """new[w] = sum_k weights[k] * table[w*ell + k]."""
    ell = weights.size
    m = table.size // ell
    out = np.empty(m, dtype=np.uint64)
    for w in range(m):
        acc = np.uint64(0)
        base = w * ell
        for k in range(ell):
            acc = addmod(acc, mulmod(weights[k], table[base + k]))
        out[w] = acc
    return out


@numba.njit(cache=True, inline="always")
def _restrict(table, base, chi, c, ell):
    acc = np.uint64(0)
    for k in range(ell):
        acc = addmod(acc, mulmod(chi[c, k], table[base + k]))
    return acc


@numba.njit(cache=True)
def round_power(table, chi, power):
    """g(c) = sum_w X_c[w]^power, X_c the restriction of the table at c."""
    npts, ell = chi.shape
    m = table.size // ell
    out = np.zeros(npts, dtype=np.uint64)
    for w in range(m):
        base = w * ell
        for c in range(npts):
            x = _restrict(table, base, chi, c, ell)
            y = x
            for _ in range(power - 1):
                y = mulmod(y, x)
            out[c] = addmod(out[c], y)
    return out


@numba.njit(cache=True)
def round_product(table_a, table_b, chi):
    npts, ell = chi.shape
    m = table_a.size // ell
    out = np.zeros(npts, dtype=np.uint64)
    for w in range(m):
        base = w * ell
        for c in range(npts):
            xa = _restrict(table_a, base, chi, c, ell)
            xb = _restrict(table_b, base, chi, c, ell)
            out[c] = addmod(out[c], mulmod(xa, xb))
    return out


@numba.njit(cache=True)
def round_newton(table, chi, newton):
    """g(c) = sum_w h(X_c[w]) with h given by Newton coefficients on nodes 0..T."""
    npts, ell = chi.shape
    m = table.size // ell
    t = newton.size - 1
    p = np.uint64((1 << 61) - 1)
    out = np.zeros(npts, dtype=np.uint64)
    for w in range(m):
        base = w * ell
        for c in range(npts):
            x = _restrict(table, base, chi, c, ell)
            b = newton[t]
            for k in range(t - 1, -1, -1):
                # b = newton[k] + (x - k) * b
                xk = x + p - np.uint64(k)
                if xk >= p:
                    xk -= p
                b = addmod(newton[k], mulmod(xk, b))
            out[c] = addmod(out[c], b)
    return out


@numba.njit(cache=True)
def tree_fold(level, r):
    """Parent hashes left + right * r."""
    m = level.size // 2
    out = np.empty(m, dtype=np.uint64)
    for i in range(m):
        out[i] = addmod(level[2 * i], mulmod(level[2 * i + 1], r))
    return out


@numba.njit(cache=True)
def augmented_fold(hashes, counts, r):
    """Parent hash left + right*r + c_left*r^2 + c_right*r^3 and parent counts.

    ``counts`` is int64 (true subtree sums, assumed nonnegative and < p).
    """
    m = hashes.size // 2
    r2 = mulmod(r, r)
    r3 = mulmod(r2, r)
    out_h = np.empty(m, dtype=np.uint64)
    out_c = np.empty(m, dtype=np.int64)
    for i in range(m):
        cl = counts[2 * i]
        cr = counts[2 * i + 1]
        h = addmod(hashes[2 * i], mulmod(hashes[2 * i + 1], r))
        h = addmod(h, mulmod(np.uint64(cl), r2))
        h = addmod(h, mulmod(np.uint64(cr), r3))
        out_h[i] = h
        out_c[i] = cl + cr
    return out_h, out_c


@numba.njit(cache=True)
def weighted_sum(values, weights):
    acc = np.uint64(0)
    for i in range(values.size):
        acc = addmod(acc, mulmod(values[i], weights[i]))
    return acc


# ell = 2 fast paths: X_c = a0 + c (a1 - a0), stepped by the pair difference

@numba.njit(cache=True, inline="always")
def _submod(a, b):
    p = np.uint64((1 << 61) - 1)
    return a - b if a >= b else a + p - b


@numba.njit(cache=True)
def fold2(table, r):
    m = table.size // 2
    out = np.empty(m, dtype=np.uint64)
    for w in range(m):
        a0 = table[2 * w]
        out[w] = addmod(a0, mulmod(r, _submod(table[2 * w + 1], a0)))
    return out


@numba.njit(cache=True)
def round_power2(table, npts, power):
    m = table.size // 2
    out = np.zeros(npts, dtype=np.uint64)
    for w in range(m):
        x = table[2 * w]
        step = _submod(table[2 * w + 1], x)
        for c in range(npts):
            y = x
            for _ in range(power - 1):
                y = mulmod(y, x)
            out[c] = addmod(out[c], y)
            x = addmod(x, step)
    return out


@numba.njit(cache=True)
def round_product2(table_a, table_b, npts):
    m = table_a.size // 2
    out = np.zeros(npts, dtype=np.uint64)
    for w in range(m):
        xa = table_a[2 * w]
        xb = table_b[2 * w]
        sa = _submod(table_a[2 * w + 1], xa)
        sb = _submod(table_b[2 * w + 1], xb)
        for c in range(npts):
            out[c] = addmod(out[c], mulmod(xa, xb))
            xa = addmod(xa, sa)
            xb = addmod(xb, sb)
    return out


@numba.njit(cache=True)
def round_newton2(table, npts, newton):
    m = table.size // 2
    t = newton.size - 1
    p = np.uint64((1 << 61) - 1)
    out = np.zeros(npts, dtype=np.uint64)
    for w in range(m):
        x = table[2 * w]
        step = _submod(table[2 * w + 1], x)
        for c in range(npts):
            b = newton[t]
            for k in range(t - 1, -1, -1):
                xk = x + p - np.uint64(k)
                if xk >= p:
                    xk -= p
                b = addmod(newton[k], mulmod(xk, b))
            out[c] = addmod(out[c], b)
            x = addmod(x, step)
    return out


def warmup() -> None:
    """Load (or compile) every kernel once so timings exclude the JIT."""
    t = np.arange(8, dtype=np.uint64)
    chi = np.ones((3, 2), dtype=np.uint64)
    w = np.ones(2, dtype=np.uint64)
    fold(t, w)
    fold2(t, np.uint64(3))
    round_power(t, chi, 2)
    round_power2(t, 3, 2)
    round_product(t, t, chi)
    round_product2(t, t, 3)
    round_newton(t, chi, w)
    round_newton2(t, 3, w)
    tree_fold(t, np.uint64(3))
    augmented_fold(t, t.astype(np.int64), np.uint64(3))
    weighted_sum(t, t)
    vmul(t, t)
