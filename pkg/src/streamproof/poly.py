"""Univariate polynomials stored as their values at 0, 1, ..., deg."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

from . import field as F


@lru_cache(maxsize=256)
def _barycentric_weights(n: int) -> tuple[int, ...]:
    # w_i = 1 / prod_{m != i} (i - m) = (-1)^(n-1-i) / (i! (n-1-i)!)
    fact = [1] * n
    for i in range(1, n):
        fact[i] = F.mul(fact[i - 1], i)
    inv_fact = F.batch_inv(fact)
    weights = []
    for i in range(n):
        w = F.mul(inv_fact[i], inv_fact[n - 1 - i])
        weights.append(F.neg(w) if (n - 1 - i) & 1 else w)
    return tuple(weights)


def interpolate_at(values: Sequence[int], x: int) -> int:
    """Value at x of the unique degree < len(values) polynomial through
    (i, values[i]) for i = 0..len(values)-1."""
    n = len(values)
    if n == 0:
        return 0
    x = F.reduce(x)
    if x < n:
        return values[x]
    weights = _barycentric_weights(n)
    # prefix[i] = prod_{m < i} (x - m), suffix[i] = prod_{m > i} (x - m)
    prefix = [1] * n
    for i in range(1, n):
        prefix[i] = F.mul(prefix[i - 1], F.sub(x, i - 1))
    total = 0
    suffix = 1
    for i in range(n - 1, -1, -1):
        term = F.mul(F.mul(prefix[i], suffix), F.mul(weights[i], values[i]))
        total = F.add(total, term)
        suffix = F.mul(suffix, F.sub(x, i))
    return total


def newton_coefficients(values: Sequence[int]) -> list[int]:
    """Newton forward-difference coefficients on nodes 0..n-1.

    p(x) = c_0 + c_1 x + c_2 x(x-1) + ... with c_k = Delta^k y_0 / k!.
    """
    diffs = list(values)
    coeffs = []
    n = len(diffs)
    for k in range(n):
        coeffs.append(diffs[0])
        diffs = [F.sub(diffs[i + 1], diffs[i]) for i in range(len(diffs) - 1)]
    fact = 1
    for k in range(1, n):
        fact = F.mul(fact, k)
        coeffs[k] = F.mul(coeffs[k], F.inv(fact))
    return coeffs


@dataclass(frozen=True)
class UnivariatePoly:
    """A round message: evaluations at 0..deg, where deg = len(evals) - 1."""

    evals: tuple[int, ...]

    def __init__(self, evals: Sequence[int]):
        object.__setattr__(self, "evals", tuple(F.reduce(int(v)) for v in evals))

    @property
    def degree_bound(self) -> int:
        return len(self.evals) - 1

    def __call__(self, x: int) -> int:
        return interpolate_at(self.evals, x)

    def __len__(self) -> int:
        return len(self.evals)

    def sum_over(self, ell: int) -> int:
        """sum_{x in [ell]} g(x)."""
        total = 0
        for x in range(ell):
            total = F.add(total, self(x))
        return total

    def coefficients(self) -> list[int]:
        """Monomial coefficients, lowest degree first (Vandermonde solve)."""
        newton = newton_coefficients(self.evals)
        coeffs = [0] * len(newton)
        basis = [1]  # running product x (x-1) ... (x-k+1), monomial form
        for k, c in enumerate(newton):
            for i, b in enumerate(basis):
                coeffs[i] = F.add(coeffs[i], F.mul(c, b))
            nxt = [0] * (len(basis) + 1)
            for i, b in enumerate(basis):
                nxt[i + 1] = F.add(nxt[i + 1], b)
                nxt[i] = F.sub(nxt[i], F.mul(k, b))
            basis = nxt
        return coeffs
