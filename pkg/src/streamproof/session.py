"""Queries, the verifier's streaming sketch, and whole protocol sessions.

A :class:`Session` fixes the query, the (padded) universe, the verifier
seed and the input stream(s). The verifier side only ever sees the stream
through :class:`VerifierSketch`; the prover side is a
:class:`SessionProver` holding the full frequency vectors. The verifier's
first message names the query, so a prover needs nothing else to answer,
in-process or over the wire.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import field as F
from .freqstat import (FmaxVerifier, FrequencyStatistic, StatSketch, StatVerifier,
                       honest_fmax, residual_prover)
from .heavy import AugmentedTreeAccumulator, HeavyHittersProver, HeavyHittersVerifier, heavy_threshold
from .lde import LdeAccumulator, LdeParams, random_point, range_indicator_eval
from .protocol import Outcome, Prover, ProtocolError, Tamper, Transcript, Verifier, interact, replay
from .stream import FrequencyVector, StreamUpdate, universe_params
from .sumcheck import (DENSE_THRESHOLD, Combiner, IndicatorTable, ProverState, SumcheckProver,
                       SumcheckVerifier)
from .vtree import (ClaimProver, ReductionVerifier, SubvectorProver, SubvectorVerifier,
                    TreeHashAccumulator, decode_dictionary, dictionary_updates, honest_klargest_cut,
                    honest_predecessor, honest_successor, klargest_judge, klargest_plan,
                    predecessor_plan, single_at, successor_plan)

# first element of every query payload
F2, FK, INNER_PRODUCT, RANGE_SUM = 1, 2, 3, 4
SUBVECTOR, INDEX, DICTIONARY, PREDECESSOR, SUCCESSOR, RANGE, K_LARGEST = 5, 6, 7, 8, 9, 10, 11
HEAVY_HITTERS, F0, INVERSE, FMAX, RESIDUAL_SUM = 12, 13, 14, 15, 16

PROTOCOLS = ("f2", "fk", "inner-product", "range-sum", "subvector", "index", "dictionary",
             "predecessor", "successor", "range", "k-largest", "heavy-hitters", "f0",
             "inverse", "fmax")

_AGGREGATION = {"f2", "fk", "inner-product", "range-sum"}
_TREE = {"subvector", "index", "dictionary", "predecessor", "successor", "range", "k-largest", "fmax"}
_STAT = {"f0", "inverse", "fmax", "statistic"}


@dataclass(frozen=True)
class Query:
    protocol: str
    k: Optional[int] = None
    q: Optional[int] = None
    qL: Optional[int] = None
    qR: Optional[int] = None
    phi: Optional[Fraction] = None
    fingerprinted: bool = False
    stat: Optional[FrequencyStatistic] = None

    def __post_init__(self):
        p = self.protocol
        if p not in PROTOCOLS and p != "statistic":
            raise ValueError(f"unknown protocol {p!r}")
        need = {"fk": ("k",), "inverse": ("k",), "k-largest": ("k",),
                "range-sum": ("qL", "qR"), "subvector": ("qL", "qR"), "range": ("qL", "qR"),
                "index": ("q",), "dictionary": ("q",), "predecessor": ("q",), "successor": ("q",),
                "heavy-hitters": ("phi",), "statistic": ("stat",)}.get(p, ())
        for name in need:
            if getattr(self, name) is None:
                raise ValueError(f"{p} needs parameter {name}")
        if p == "fk" and self.k < 1:
            raise ValueError("moment order must be positive")
        if p == "k-largest" and self.k < 1:
            raise ValueError("k must be positive")
        if p == "inverse" and self.k < 0:
            raise ValueError("frequency must be nonnegative")
        if self.qL is not None and not 0 <= self.qL <= self.qR:
            raise ValueError(f"bad range [{self.qL}, {self.qR}]")
        if self.q is not None and self.q < 0:
            raise ValueError("query index must be nonnegative")
        if self.phi is not None:
            object.__setattr__(self, "phi", Fraction(self.phi))
            if not 0 < self.phi <= 1:
                raise ValueError("phi must lie in (0, 1]")

    @property
    def streams(self) -> int:
        return 2 if self.protocol == "inner-product" else 1

    def max_index(self) -> int:
        return max([v for v in (self.q, self.qR) if v is not None], default=0)

    def label(self) -> str:
        p = self.protocol
        if p == "f2":
            return "F2"
        if p == "fk":
            return f"F{self.k}"
        if p == "inner-product":
            return "IP"
        if p in ("range-sum", "subvector", "range"):
            return f"{p.upper()}[{self.qL},{self.qR}]"
        if p in ("index", "dictionary", "predecessor", "successor"):
            return f"{p.upper()}[{self.q}]"
        if p == "k-largest":
            return f"K-LARGEST[{self.k}]"
        if p == "heavy-hitters":
            return f"HH[{self.phi}]"
        if p == "inverse":
            return f"INVERSE[{self.k}]"
        if p == "statistic":
            return self.stat.name
        return p.upper()

    def statistic(self) -> FrequencyStatistic:
        if self.protocol == "f0":
            return FrequencyStatistic.distinct()
        if self.protocol == "inverse":
            return FrequencyStatistic.inverse_point(self.k)
        if self.protocol == "statistic":
            return self.stat
        raise ValueError(f"{self.protocol} is not a frequency statistic")

    def prepare(self, updates: Sequence[StreamUpdate]) -> list[StreamUpdate]:
        """Map raw input to vector updates (dictionary pairs get the +1 offset)."""
        if self.protocol == "dictionary":
            return dictionary_updates(updates)
        return [StreamUpdate(int(i), int(d)) for i, d in updates]


def format_value(query: Query, value) -> str:
    p = query.protocol
    if value is None:
        return "not found" if p == "dictionary" else "none"
    if isinstance(value, list):
        return "[" + ", ".join(f"({i}, {v})" for i, v in value) + "]"
    if p in _AGGREGATION or p in _STAT:
        return str(F.to_signed(value)) if p != "fmax" else str(value)
    return str(value)


# -- verifier side -------------------------------------------------------------------

class VerifierSketch:
    """Everything the verifier keeps while the stream goes by.

    All randomness is drawn from ``seed`` before the first update, in a
    fixed order, and only the components the query needs are maintained.
    """

    def __init__(self, query: Query, u: int, seed: int):
        size, d = universe_params(u)
        self.query = query
        self.u = size
        self.seed = seed
        rng = random.Random(seed)
        self.params = LdeParams(2, d, size)
        self.point = random_point(d, rng)
        self.tree_seeds = random_point(d, rng)
        self.aug_seeds = random_point(d, rng)
        self.fp_key = (rng.randrange(1, F.P), rng.randrange(1, F.P))
        p = query.protocol
        self.lde = ([LdeAccumulator(self.params, self.point) for _ in range(query.streams)]
                    if p in _AGGREGATION or p in _STAT else [])
        self.tree = TreeHashAccumulator(self.tree_seeds) if p in _TREE else None
        self.aug = AugmentedTreeAccumulator(self.aug_seeds) if p in _STAT or p == "heavy-hitters" else None
        self.n = 0

    @property
    def d(self) -> int:
        return self.params.d

    def update(self, upd: StreamUpdate, stream: int = 0) -> None:
        if stream:
            self.lde[stream].update(upd)
            return
        for acc in self.lde[:1]:
            acc.update(upd)
        if self.tree is not None:
            self.tree.update(upd)
        if self.aug is not None:
            self.aug.update(upd)
        self.n += upd[1]

    def extend(self, updates: Sequence[StreamUpdate], stream: int = 0) -> "VerifierSketch":
        for upd in updates:
            self.update(upd, stream)
        return self

    def state_elements(self) -> int:
        total = 1
        if self.lde:
            total += self.d + len(self.lde)
        if self.tree is not None:
            total += self.tree.state_elements()
        if self.aug is not None:
            total += self.aug.state_elements() + 2
        return total

    def stat_sketch(self) -> StatSketch:
        return StatSketch(self.point, self.lde[0].value, self.aug, self.n, self.fp_key)

    # sidecar files: the verifier's private state next to a transcript
    def to_json(self) -> str:
        q = self.query
        return json.dumps({
            "query": {"protocol": q.protocol, "k": q.k, "q": q.q, "qL": q.qL, "qR": q.qR,
                      "phi": str(q.phi) if q.phi is not None else None,
                      "fingerprinted": q.fingerprinted},
            "u": self.u, "seed": self.seed, "n": self.n,
            "lde": [acc.value for acc in self.lde],
            "tree_root": self.tree.root if self.tree else None,
            "aug_root": self.aug.root if self.aug else None,
        }, indent=1)

    @classmethod
    def from_json(cls, text: str) -> "VerifierSketch":
        data = json.loads(text)
        qd = dict(data["query"])
        if qd["protocol"] == "statistic":
            raise ValueError("custom statistics cannot be restored from a file")
        if qd.get("phi") is not None:
            qd["phi"] = Fraction(qd["phi"])
        sk = cls(Query(**qd), data["u"], data["seed"])
        sk.n = data["n"]
        for acc, v in zip(sk.lde, data["lde"]):
            acc.acc = v
        if sk.tree is not None:
            sk.tree.root = data["tree_root"]
        if sk.aug is not None:
            sk.aug.root = data["aug_root"]
        return sk


def build_verifier(sketch: VerifierSketch) -> Verifier:
    q = sketch.query
    p = q.protocol
    u = sketch.u
    for name in ("q", "qR"):
        v = getattr(q, name)
        if v is not None and v >= u:
            raise ValueError(f"query index {v} outside universe [0, {u})")
    if p == "f2":
        return SumcheckVerifier(sketch.point, [sketch.lde[0].value], Combiner.power(2), [F2])
    if p == "fk":
        return SumcheckVerifier(sketch.point, [sketch.lde[0].value], Combiner.power(q.k), [FK, q.k])
    if p == "inner-product":
        return SumcheckVerifier(sketch.point, [acc.value for acc in sketch.lde], Combiner.product(),
                                [INNER_PRODUCT])
    if p == "range-sum":
        fb = range_indicator_eval(q.qL, q.qR, sketch.point)
        return SumcheckVerifier(sketch.point, [sketch.lde[0].value, fb], Combiner.product(),
                                [RANGE_SUM, q.qL, q.qR])
    if p in ("subvector", "range"):
        code = SUBVECTOR if p == "subvector" else RANGE
        return SubvectorVerifier(sketch.tree, q.qL, q.qR, [code, q.qL, q.qR])
    if p in ("index", "dictionary"):
        return _PointVerifier(sketch.tree, q.q, [INDEX if p == "index" else DICTIONARY, q.q],
                              dictionary=p == "dictionary")
    if p == "predecessor":
        return ReductionVerifier(sketch.tree, [PREDECESSOR, q.q], 1, predecessor_plan(q.q, u),
                                 single_at(lambda c: c[0]), SUBVECTOR)
    if p == "successor":
        return ReductionVerifier(sketch.tree, [SUCCESSOR, q.q], 1, successor_plan(q.q, u),
                                 single_at(lambda c: c[0]), SUBVECTOR)
    if p == "k-largest":
        return ReductionVerifier(sketch.tree, [K_LARGEST, q.k], 1, klargest_plan(u),
                                 klargest_judge(q.k), SUBVECTOR)
    if p == "heavy-hitters":
        tau = heavy_threshold(q.phi, sketch.n)
        return HeavyHittersVerifier(sketch.aug, sketch.n, tau, [HEAVY_HITTERS, tau, int(q.fingerprinted)],
                                    fingerprinted=q.fingerprinted, fp_key=sketch.fp_key)
    if p in ("f0", "inverse", "statistic"):
        return StatVerifier(sketch.stat_sketch(), q.statistic(), u, HEAVY_HITTERS, RESIDUAL_SUM)
    if p == "fmax":
        return FmaxVerifier([FMAX], sketch.tree, sketch.stat_sketch(), u, SUBVECTOR,
                            HEAVY_HITTERS, RESIDUAL_SUM)
    raise ValueError(f"no verifier for {p!r}")


class _PointVerifier(SubvectorVerifier):
    """INDEX / DICTIONARY: a one-cell sub-vector query."""

    def __init__(self, acc, q, query, dictionary=False):
        super().__init__(acc, q, q, query)
        self.dictionary = dictionary

    def _finish(self, result):
        value = result[0][1] if result else 0
        super()._finish(decode_dictionary(value) if self.dictionary else value)


# -- prover side ---------------------------------------------------------------------

class SessionProver(Prover):
    """Answers any query payload; later messages go to the active sub-prover."""

    def __init__(self, u: int, vectors: Sequence[FrequencyVector],
                 dense_threshold: int = DENSE_THRESHOLD):
        size, d = universe_params(u)
        self.u, self.d = size, d
        self.vectors = list(vectors)
        self.dense_threshold = dense_threshold
        self.active: Optional[Prover] = None

    def respond(self, payload):
        if self.active is None or self.active.done:
            self.active = self._dispatch(payload)
        return self.active.respond(payload)

    @property
    def done(self) -> bool:
        return self.active is not None and self.active.done

    def _sumcheck(self, vectors, combiner) -> SumcheckProver:
        return SumcheckProver(ProverState.from_vectors(vectors, combiner, 2, self.d, self.dense_threshold))

    def _dispatch(self, payload) -> Prover:
        if not payload:
            raise ProtocolError("empty query")
        code, args = payload[0], list(payload[1:])
        a = self.vectors[0]
        u = self.u
        if code == F2:
            return self._sumcheck([a], Combiner.power(2))
        if code == FK:
            return self._sumcheck([a], Combiner.power(args[0]))
        if code == INNER_PRODUCT:
            if len(self.vectors) < 2:
                raise ProtocolError("inner product needs two streams")
            return self._sumcheck(self.vectors[:2], Combiner.product())
        if code == RANGE_SUM:
            return self._sumcheck([a, IndicatorTable(args[0], args[1])], Combiner.product())
        if code in (SUBVECTOR, RANGE):
            return SubvectorProver(a, u, args[0], args[1], self.dense_threshold)
        if code in (INDEX, DICTIONARY):
            return SubvectorProver(a, u, args[0], args[0], self.dense_threshold)
        if code == PREDECESSOR:
            return ClaimProver([honest_predecessor(a, args[0])])
        if code == SUCCESSOR:
            return ClaimProver([honest_successor(a, args[0])])
        if code == K_LARGEST:
            return ClaimProver([honest_klargest_cut(a, args[0])])
        if code == HEAVY_HITTERS:
            return HeavyHittersProver(a, u, args[0], bool(args[1]), self.dense_threshold)
        if code == RESIDUAL_SUM:
            tau, T, grid = args[0], args[1], args[2:]
            if len(grid) != T + 1:
                raise ProtocolError("statistic grid has the wrong length")
            return residual_prover(a, u, self.d, tau, grid, self.dense_threshold)
        if code == FMAX:
            return ClaimProver(list(honest_fmax(a)))
        raise ProtocolError(f"unknown query code {code}")


class TamperingProver(Prover):
    """Wraps a prover and rewrites its outgoing messages (attack experiments)."""

    def __init__(self, inner: Prover, tamper: Tamper):
        self.inner = inner
        self.tamper = tamper
        self.count = 0

    def respond(self, payload):
        self.count += 1
        return self.tamper(self.count, list(self.inner.respond(payload)))

    @property
    def done(self) -> bool:
        return self.inner.done


# -- sessions --------------------------------------------------------------------------

def infer_universe(query: Query, streams: Sequence[Sequence[StreamUpdate]]) -> int:
    top = max([i for s in streams for i, _ in s] + [query.max_index(), 1])
    return universe_params(top + 1)[0]


@dataclass
class Session:
    query: Query
    streams: list[list[StreamUpdate]]
    u: int
    seed: int
    dense_threshold: int = DENSE_THRESHOLD
    sketch: VerifierSketch = field(init=False)

    def __post_init__(self):
        self.streams = [self.query.prepare(s) for s in self.streams]
        if len(self.streams) != self.query.streams:
            raise ValueError(f"{self.query.protocol} takes {self.query.streams} stream(s)")
        self.u = universe_params(self.u)[0]
        self.sketch = VerifierSketch(self.query, self.u, self.seed)
        for k, s in enumerate(self.streams):
            self.sketch.extend(s, k)

    @classmethod
    def create(cls, query: Query, streams: Sequence[Sequence], u: Optional[int] = None,
               seed: int = 0, dense_threshold: int = DENSE_THRESHOLD) -> "Session":
        streams = [list(s) for s in streams]
        if u is None:
            u = infer_universe(query, streams)
        return cls(query, streams, u, seed, dense_threshold)

    def vectors(self) -> list[FrequencyVector]:
        return [FrequencyVector(self.u, s) for s in self.streams]

    def verifier(self) -> Verifier:
        return build_verifier(self.sketch)

    def prover(self, tamper: Optional[Tamper] = None) -> Prover:
        p = SessionProver(self.u, self.vectors(), self.dense_threshold)
        return TamperingProver(p, tamper) if tamper else p

    def run(self, prover: Optional[Prover] = None) -> Outcome:
        return interact(prover or self.prover(), self.verifier())

    def replay(self, transcript: Transcript) -> Outcome:
        return replay(transcript, self.verifier())


def run_query(query: Query, streams: Sequence[Sequence], u: Optional[int] = None, seed: int = 0,
              dense_threshold: int = DENSE_THRESHOLD) -> Outcome:
    return Session.create(query, streams, u, seed, dense_threshold).run()


# entry points per query family

def run_aggregation(streams: Sequence[Sequence], kind: str, seed: int = 0, u: Optional[int] = None,
                    k: Optional[int] = None, qL: Optional[int] = None, qR: Optional[int] = None) -> Outcome:
    """kind: 'f2', 'fk', 'inner-product' or 'range-sum'."""
    if kind not in _AGGREGATION:
        raise ValueError(f"{kind!r} is not an aggregation query")
    return run_query(Query(kind, k=k, qL=qL, qR=qR), streams, u, seed)


def run_subvector(stream: Sequence, qL: int, qR: int, seed: int = 0, u: Optional[int] = None) -> Outcome:
    return run_query(Query("subvector", qL=qL, qR=qR), [stream], u, seed)


def query_reporting(stream: Sequence, query: Query, seed: int = 0, u: Optional[int] = None) -> Outcome:
    return run_query(query, [stream], u, seed)


def run_heavy_hitters(stream: Sequence, phi, seed: int = 0, fingerprinted: bool = False,
                      u: Optional[int] = None) -> Outcome:
    return run_query(Query("heavy-hitters", phi=Fraction(phi), fingerprinted=fingerprinted),
                     [stream], u, seed)


def run_frequency_statistic(stream: Sequence, stat: FrequencyStatistic, seed: int = 0,
                            u: Optional[int] = None) -> Outcome:
    return run_query(Query("statistic", stat=stat), [stream], u, seed)


def query_fmax(stream: Sequence, seed: int = 0, u: Optional[int] = None) -> Outcome:
    return run_query(Query("fmax"), [stream], u, seed)


def inner_product_via_f2(a: Sequence, b: Sequence, seed: int = 0, u: Optional[int] = None) -> Optional[int]:
    """a.b from three independent F2 runs: (F2(a+b) - F2(a) - F2(b)) / 2.

    Returns None if any run rejects. Each run draws its own point, since
    reusing one point across sum-checks would reveal it too early.
    """
    a, b = list(a), list(b)
    if u is None:
        u = infer_universe(Query("f2"), [a, b])
    runs = [run_query(Query("f2"), [s], u, seed + k) for k, s in enumerate((a + b, a, b))]
    if not all(o.accepted for o in runs):
        return None
    total = F.sub(F.sub(runs[0].result, runs[1].result), runs[2].result)
    return F.mul(total, F.inv(2))
