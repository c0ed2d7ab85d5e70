"""Frequency statistics F = sum_i h(a_i) and the queries built on them.

Items with a_i >= tau (tau <= T + 1, T = ceil(sqrt u)) are found and
certified by the fingerprinted heavy-hitter protocol; the verifier adds
h(a_i) for each into F' and subtracts a_i chi_i(r) from its LDE value as
they are reported. Every remaining entry lies in [0, T], where h agrees with
the degree-T interpolant h~, so a sum-check of h~ over the residual vector
finishes the job:

    F = sum_x g_1(x) + F' - |H| h(0)

(each removed entry now reads 0 and contributed h(0) to the sum-check).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

from . import field as F
from .heavy import AugmentedTreeAccumulator, HeavyHittersVerifier
from .lde import chi_index
from .poly import UnivariatePoly
from .protocol import PhasedVerifier, ProtocolError, expect
from .stream import FrequencyVector
from .sumcheck import Combiner, ProverState, SumcheckProver, SumcheckVerifier
from .vtree import ClaimVerifier, SubvectorVerifier, TreeHashAccumulator


def stat_degree(u: int) -> int:
    """T = ceil(sqrt(u))."""
    return math.isqrt(u - 1) + 1 if u > 1 else 1


def _ceil_sqrt(x: int) -> int:
    return math.isqrt(x - 1) + 1 if x > 0 else 0


def stat_threshold(n: int, u: int) -> int:
    """tau = ceil(n / sqrt(u)), capped at T + 1 so every a_i > T is removed."""
    phi_n = _ceil_sqrt(-(-n * n // u))
    return max(1, min(phi_n, stat_degree(u) + 1))


@dataclass(frozen=True)
class FrequencyStatistic:
    """h on nonnegative frequencies plus a short name for reports."""

    name: str
    h: Callable[[int], int] = field(compare=False)

    def grid(self, T: int) -> list[int]:
        vals = [int(self.h(i)) for i in range(T + 1)]
        for i, v in enumerate(vals):
            if not 0 <= v < F.P:
                raise ValueError(f"h({i}) = {v} does not fit in the field")
        return vals

    def __call__(self, x: int) -> int:
        return int(self.h(x))

    @classmethod
    def distinct(cls) -> "FrequencyStatistic":
        return cls("F0", lambda x: 1 if x > 0 else 0)

    @classmethod
    def inverse_point(cls, k: int) -> "FrequencyStatistic":
        return cls(f"inverse[{k}]", lambda x: 1 if x == k else 0)

    @classmethod
    def above(cls, lb: int) -> "FrequencyStatistic":
        return cls(f"above[{lb}]", lambda x: 1 if x > lb else 0)


def tilde_h_interpolate(h: Callable[[int], int], T: int) -> UnivariatePoly:
    return UnivariatePoly([h(i) for i in range(T + 1)])


# -- verifier ----------------------------------------------------------------------

@dataclass
class StatSketch:
    """What the verifier streams for a frequency statistic."""

    point: tuple[int, ...]
    lde_value: int
    tree: AugmentedTreeAccumulator
    n: int
    fp_key: tuple[int, int]


class StatVerifier(PhasedVerifier):
    """Heavy-hitter phase, then a sum-check of h~ over the residual vector."""

    protocol = "frequency-statistic"

    def __init__(self, sketch: StatSketch, stat: FrequencyStatistic, u: int,
                 hh_code: int, residual_code: int):
        self.sketch = sketch
        self.stat = stat
        self.T = stat_degree(u)
        self.tau = stat_threshold(sketch.n, u)
        self.residual_code = residual_code
        self.residual = sketch.lde_value
        self.f_prime = 0
        self.removed = 0
        hh = HeavyHittersVerifier(sketch.tree, sketch.n, self.tau, [hh_code, self.tau, 1],
                                  fingerprinted=True, fp_key=sketch.fp_key,
                                  on_heavy=self._strip)
        super().__init__(hh)

    def _strip(self, i: int, count: int) -> None:
        self.f_prime = F.add(self.f_prime, F.reduce(self.stat(count)))
        self.removed += 1
        self.residual = F.sub(self.residual, F.mul(count, chi_index(i, self.sketch.point)))

    def next_phase(self, done):
        if isinstance(done, HeavyHittersVerifier):
            grid = self.stat.grid(self.T)
            return SumcheckVerifier(self.sketch.point, [self.residual], Combiner.polynomial(grid),
                                    [self.residual_code, self.tau, self.T, *grid])
        return None

    def final_result(self):
        total = self.phase.result
        value = F.sub(F.add(total, self.f_prime), F.mul(self.removed, F.reduce(self.stat(0))))
        return value

    def extra_state_elements(self) -> int:
        # r and the residual LDE value while the heavy phase runs; F' and |H|
        if isinstance(self.phase, HeavyHittersVerifier):
            return len(self.sketch.point) + 3
        return 2


class FmaxVerifier(PhasedVerifier):
    """Prover names (i*, lb); a_{i*} = lb is checked on the sub-vector tree,
    then the count of items above lb must be certified as zero."""

    protocol = "fmax"

    def __init__(self, query: Sequence[int], tree: TreeHashAccumulator, sketch: StatSketch,
                 u: int, subvector_code: int, hh_code: int, residual_code: int):
        super().__init__(ClaimVerifier(query, 2))
        self.tree = tree
        self.sketch = sketch
        self.u = u
        self.codes = (subvector_code, hh_code, residual_code)
        self.claim: tuple[int, int] | None = None

    def next_phase(self, done):
        if isinstance(done, ClaimVerifier):
            i, lb = done.result
            expect(i < self.u, "claimed location outside the universe")
            self.claim = (i, lb)
            return SubvectorVerifier(self.tree, i, i, [self.codes[0], i, i])
        if isinstance(done, SubvectorVerifier):
            i, lb = self.claim
            got = done.result[0][1] if done.result else 0
            expect(got == lb, f"a[{i}] is {got}, not the claimed maximum {lb}")
            return StatVerifier(self.sketch, FrequencyStatistic.above(lb), self.u,
                                self.codes[1], self.codes[2])
        if isinstance(done, StatVerifier):
            expect(done.result == 0, f"{done.result} item(s) exceed the claimed maximum")
        return None

    def final_result(self):
        return self.claim[1]

    def extra_state_elements(self) -> int:
        return 2


# -- prover ------------------------------------------------------------------------

def residual_vector(vec: FrequencyVector, tau: int) -> FrequencyVector:
    out = FrequencyVector(vec.u)
    for i, v in vec.nonzero():
        if v < tau:
            out.update((i, v))
    return out


def residual_prover(vec: FrequencyVector, u: int, d: int, tau: int, grid: Sequence[int],
                    dense_threshold: int) -> SumcheckProver:
    if any(v < 0 for _, v in vec.nonzero()):
        raise ProtocolError("frequency statistics need nonnegative frequencies")
    res = residual_vector(vec, tau)
    if res.nonzero() and max(v for _, v in res.nonzero()) >= len(grid):
        raise ProtocolError("residual entry exceeds the interpolation grid")
    state = ProverState.from_vectors([res], Combiner.polynomial(grid), 2, d, dense_threshold)
    return SumcheckProver(state)


def honest_fmax(vec: FrequencyVector) -> tuple[int, int]:
    best = (0, 0)
    for i, v in vec.nonzero():
        if v > best[1]:
            best = (i, v)
    return best
