"""Sum-check prover and verifier for aggregation queries.

The prover sends, in round j, g_j as its values at 0..deg where

    g_j(c) = sum over x_{j+1..d} in [ell] of  phi(f(r_1..r_{j-1}, c, x_{j+1..d}))

and phi is the combiner: x^2 (F2), x^k (Fk), x*y over two vectors (inner
product, range-sum), or a degree-T polynomial (frequency statistics). The
prover keeps the table A_j of the LDE restricted to the revealed prefix and
folds it with chi_0(r_j), ..., chi_{ell-1}(r_j) after each round, so the
whole proof costs O(u) table work.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _kernels as K
from . import field as F
from .lde import chi_index, chi_matrix, chi_scalar, dyadic_blocks
from .poly import UnivariatePoly, interpolate_at, newton_coefficients
from .protocol import Prover, ProtocolError, Verifier, expect

DENSE_THRESHOLD = 1 << 26


@dataclass(frozen=True)
class Combiner:
    """The function phi applied pointwise before summing.

    ``kind`` is ``"power"`` (x^degree), ``"product"`` (x*y) or ``"poly"``
    (the polynomial through ``values`` at 0..degree).
    """

    kind: str
    degree: int
    values: tuple[int, ...] = ()

    @classmethod
    def power(cls, k: int) -> "Combiner":
        if k < 1:
            raise ValueError("moment order must be positive")
        return cls("power", k)

    @classmethod
    def product(cls) -> "Combiner":
        return cls("product", 2)

    @classmethod
    def polynomial(cls, values: Sequence[int]) -> "Combiner":
        return cls("poly", len(values) - 1, tuple(F.reduce(v) for v in values))

    @property
    def arity(self) -> int:
        return 2 if self.kind == "product" else 1

    def round_degree(self, ell: int) -> int:
        return self.degree * (ell - 1)

    def apply(self, *xs: int) -> int:
        if len(xs) != self.arity:
            raise ValueError(f"{self.kind} combiner takes {self.arity} value(s)")
        if self.kind == "power":
            return F.power(xs[0], self.degree)
        if self.kind == "product":
            return F.mul(xs[0], xs[1])
        return interpolate_at(self.values, xs[0])


class IndicatorTable:
    """Lazily evaluated 0/1 indicator of [qL, qR] for the sparse prover (ell = 2).

    After L variables are bound to r_1..r_L, entry x is the LDE restricted
    to that prefix over the block of leaves below x.
    """

    def __init__(self, qL: int, qR: int):
        self.qL, self.qR = qL, qR
        self.prefix: list[int] = []

    def get(self, x: int, default: int = 0) -> int:
        level = len(self.prefix)
        lo = max(self.qL, x << level)
        hi = min(self.qR, ((x + 1) << level) - 1)
        if lo > hi:
            return 0
        total = 0
        for j, m in dyadic_blocks(lo, hi):
            total = F.add(total, chi_index(m & ((1 << (level - j)) - 1), self.prefix[j:level]))
        return total

    def bind(self, r: int) -> None:
        self.prefix.append(r)


class ProverState:
    """Folded tables A_j (and B_j for two-vector combiners) plus round index."""

    def __init__(self, tables: Sequence, combiner: Combiner, ell: int, d: int,
                 dense: bool):
        if len(tables) != combiner.arity:
            raise ProtocolError("combiner arity does not match the number of tables")
        self.combiner = combiner
        self.ell = ell
        self.d = d
        self.dense = dense
        self.tables = list(tables)
        self.round = 1
        self.folded = 0
        npts = combiner.round_degree(ell) + 1
        self._chi = chi_matrix(ell, npts)
        if combiner.kind == "poly":
            self._newton = np.array(newton_coefficients(combiner.values), dtype=np.uint64)
            self._phi_zero = combiner.values[0]

    @classmethod
    def from_vectors(cls, vectors: Sequence, combiner: Combiner, ell: int, d: int,
                     dense_threshold: int = DENSE_THRESHOLD) -> "ProverState":
        u = ell ** d
        dense = u <= dense_threshold
        tables = []
        for vec in vectors:
            if isinstance(vec, IndicatorTable):
                if dense:
                    arr = np.zeros(u, dtype=np.uint64)
                    arr[vec.qL:vec.qR + 1] = 1
                    tables.append(arr)
                else:
                    tables.append(vec)
            elif isinstance(vec, np.ndarray):
                tables.append(vec if dense else {int(i): int(vec[i]) for i in np.flatnonzero(vec)})
            elif dense:
                tables.append(vec.to_field_array(u))
            else:
                tables.append({i: F.reduce(v) for i, v in vec.nonzero()})
        return cls(tables, combiner, ell, d, dense)

    def table_size(self) -> int:
        return self.ell ** (self.d - self.folded)

    # -- round messages -----------------------------------------------------

    def round_message(self, j: int) -> UnivariatePoly:
        if j != self.round or self.folded != j - 1 or j > self.d:
            raise ProtocolError(f"round {j} requested, state is at round {self.round}")
        evals = self._dense_round() if self.dense else self._sparse_round()
        self.round += 1
        return UnivariatePoly(evals)

    def _dense_round(self) -> list[int]:
        c = self.combiner
        if self.ell == 2:
            npts = len(self._chi)
            if c.kind == "power":
                out = K.round_power2(self.tables[0], npts, c.degree)
            elif c.kind == "product":
                out = K.round_product2(self.tables[0], self.tables[1], npts)
            else:
                out = K.round_newton2(self.tables[0], npts, self._newton)
            return [int(x) for x in out]
        if c.kind == "power":
            out = K.round_power(self.tables[0], self._chi, c.degree)
        elif c.kind == "product":
            out = K.round_product(self.tables[0], self.tables[1], self._chi)
        else:
            out = K.round_newton(self.tables[0], self._chi, self._newton)
        return [int(x) for x in out]

    def _sparse_round(self) -> list[int]:
        ell = self.ell
        chi = [[int(x) for x in row] for row in self._chi]
        npts = len(chi)
        a = self.tables[0]
        groups = sorted({i // ell for i in a})
        out = [0] * npts
        for w in groups:
            cols = [[t.get(w * ell + k, 0) for k in range(ell)] for t in self.tables]
            for c in range(npts):
                xs = [sum(chi[c][k] * col[k] for k in range(ell)) % F.P for col in cols]
                out[c] = F.add(out[c], self.combiner.apply(*xs))
        if self.combiner.kind == "poly":
            empty = self.table_size() // ell - len(groups)
            zero_term = F.mul(F.reduce(empty), self._phi_zero)
            out = [F.add(v, zero_term) for v in out]
        return out

    def fold(self, r: int) -> None:
        if self.folded + 2 != self.round or self.folded >= self.d - 1:
            raise ProtocolError("fold out of order")
        weights = [chi_scalar(k, r, self.ell) for k in range(self.ell)]
        if self.dense and self.ell == 2:
            self.tables = [K.fold2(t, np.uint64(F.reduce(r))) for t in self.tables]
        elif self.dense:
            w = np.array(weights, dtype=np.uint64)
            self.tables = [K.fold(t, w) for t in self.tables]
        else:
            self.tables = [self._sparse_fold(t, weights, r) for t in self.tables]
        self.folded += 1

    def _sparse_fold(self, table, weights, r):
        if isinstance(table, IndicatorTable):
            table.bind(r)
            return table
        out: dict[int, int] = {}
        ell = self.ell
        for i, v in table.items():
            w, k = divmod(i, ell)
            out[w] = (out.get(w, 0) + weights[k] * v) % F.P
        return {w: v for w, v in out.items() if v}


def prover_round(state: ProverState, j: int) -> UnivariatePoly:
    return state.round_message(j)


class SumcheckProver(Prover):
    """Answers the query with g_1, then each revealed r_j with g_{j+1}."""

    def __init__(self, state: ProverState):
        self.state = state
        self._sent = 0

    def respond(self, payload):
        if self._sent:
            if len(payload) != 1:
                raise ProtocolError("expected a single challenge")
            self.state.fold(payload[0])
        self._sent += 1
        return list(self.state.round_message(self._sent).evals)

    @property
    def done(self) -> bool:
        return self._sent >= self.state.d


# -- verifier ------------------------------------------------------------------

def verifier_round_check(prev: UnivariatePoly, r_prev: int, cur: UnivariatePoly,
                         ell: int, degree_bound: int) -> bool:
    if not 1 <= len(cur) <= degree_bound + 1:
        return False
    return prev(r_prev) == cur.sum_over(ell)


def verifier_final_check(g_d: UnivariatePoly, r_d: int, lde_vals: Sequence[int],
                         combiner: Combiner) -> bool:
    return g_d(r_d) == combiner.apply(*lde_vals)


class SumcheckVerifier(Verifier):
    """Checks d round polynomials against the private point r and f(r) values.

    Keeps r, the LDE value(s), the running claim g_{j-1}(r_{j-1}) and the
    certified total; round polynomials are dropped once checked.
    """

    protocol = "sumcheck"

    def __init__(self, point: Sequence[int], lde_vals: Sequence[int], combiner: Combiner,
                 query: Sequence[int], ell: int = 2):
        super().__init__()
        self.point = tuple(point)
        self.lde_vals = tuple(lde_vals)
        self.combiner = combiner
        self.ell = ell
        self.degree_bound = combiner.round_degree(ell)
        self._query = list(query)
        self.claim: int | None = None
        self.value: int | None = None
        self.round = 0

    @property
    def d(self) -> int:
        return len(self.point)

    def query(self):
        return list(self._query)

    def receive(self, payload):
        self.round += 1
        j = self.round
        expect(j <= self.d, "unexpected extra round polynomial")
        expect(1 <= len(payload) <= self.degree_bound + 1,
               f"round {j} polynomial has {len(payload)} values, bound is {self.degree_bound + 1}")
        expect(all(0 <= v < F.P for v in payload), "non-canonical field element")
        g = UnivariatePoly(payload)
        total = g.sum_over(self.ell)
        if j == 1:
            self.value = total
        else:
            expect(self.claim == total, f"round {j} sum does not match g_{j - 1}(r_{j - 1})")
        r_j = self.point[j - 1]
        if j < self.d:
            self.claim = g(r_j)
            return [r_j]
        expect(verifier_final_check(g, r_j, self.lde_vals, self.combiner),
               "final evaluation does not match the streamed LDE")
        self.claim = None
        self._finish(self.value)
        return None

    def state_elements(self) -> int:
        return len(self.point) + len(self.lde_vals) + 2
