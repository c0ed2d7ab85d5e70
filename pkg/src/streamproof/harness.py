"""Synthetic streams, transcript mutations and the benchmark driver."""

from __future__ import annotations

import csv
import io
import random
import time
from dataclasses import dataclass, field, fields
from typing import Optional, Sequence

import numpy as np

from . import _kernels as K
from . import field as F
from .lde import LdeAccumulator, LdeParams, lde_eval_dense, random_point
from .protocol import P2V, V2P, Outcome, Record, Tamper, Transcript, replay
from .session import (DICTIONARY, F2, HEAVY_HITTERS, INDEX, RANGE, SUBVECTOR, Query, Session,
                      SessionProver)
from .stream import FrequencyVector, StreamUpdate, from_vector
from .sumcheck import Combiner, ProverState, SumcheckProver, SumcheckVerifier


# -- streams -----------------------------------------------------------------------

@dataclass(frozen=True)
class StreamSpec:
    """``distribution`` is ('uniform', max), ('zipf', s, n) or ('explicit', values)."""

    u: int
    distribution: tuple
    seed: int = 0
    unit: bool = False

    @classmethod
    def parse(cls, u: int, text: str, seed: int = 0, unit: bool = False) -> "StreamSpec":
        kind, _, rest = text.partition(":")
        if kind == "uniform":
            return cls(u, ("uniform", int(rest)), seed, unit)
        if kind == "zipf":
            s, n = rest.split(":")
            return cls(u, ("zipf", float(s), int(n)), seed, unit)
        if kind == "explicit":
            return cls(u, ("explicit", tuple(int(v) for v in rest.split(",") if v)), seed, unit)
        raise ValueError(f"unknown distribution {text!r}")


def stream_counts(spec: StreamSpec) -> np.ndarray:
    kind = spec.distribution[0]
    rng = np.random.default_rng(spec.seed)
    if kind == "uniform":
        return rng.integers(0, spec.distribution[1], size=spec.u, endpoint=True, dtype=np.int64)
    if kind == "zipf":
        s, n = spec.distribution[1], spec.distribution[2]
        ranks = np.arange(1, spec.u + 1, dtype=np.float64)
        probs = ranks ** -s
        probs /= probs.sum()
        keys = rng.permutation(spec.u)
        return np.bincount(keys[rng.choice(spec.u, size=n, p=probs)], minlength=spec.u).astype(np.int64)
    if kind == "explicit":
        values = spec.distribution[1]
        if len(values) > spec.u:
            raise ValueError("explicit vector longer than the universe")
        out = np.zeros(spec.u, dtype=np.int64)
        out[:len(values)] = values
        return out
    raise ValueError(f"unknown distribution {kind!r}")


def generate_stream(spec: StreamSpec) -> list[StreamUpdate]:
    """Aggregated updates (one per nonzero index) or unit updates, in a
    seed-determined order."""
    counts = stream_counts(spec)
    updates = from_vector(counts.tolist(), unit=spec.unit)
    order = np.random.default_rng(spec.seed + 1).permutation(len(updates))
    return [updates[k] for k in order]


# -- mutations -----------------------------------------------------------------------

@dataclass(frozen=True)
class MutationStrategy:
    kind: str
    args: tuple[int, ...]

    KINDS = {"flip-poly-eval": 3, "flip-answer-entry": 2, "drop-witness": 2, "shift-stream": 2}

    def __post_init__(self):
        want = self.KINDS.get(self.kind)
        if want is None:
            raise ValueError(f"unknown mutation {self.kind!r}")
        if len(self.args) != want:
            raise ValueError(f"{self.kind} takes {want} arguments")

    @classmethod
    def parse(cls, text: str) -> "MutationStrategy":
        kind, *rest = text.split(":")
        return cls(kind, tuple(int(a) for a in rest))

    def __str__(self) -> str:
        return ":".join([self.kind, *map(str, self.args)])


def _prover_records(t: Transcript) -> list[int]:
    return [k for k, rec in enumerate(t.records) if rec.direction == P2V]


def _replace(t: Transcript, k: int, payload: Sequence[int]) -> Transcript:
    out = t.copy()
    rec = out.records[k]
    out.records[k] = Record(rec.round, rec.direction, tuple(payload))
    return out


def _phase_records(t: Transcript, codes: set[int]) -> list[list[int]]:
    """Prover record positions grouped by sub-protocol, for sub-protocols
    whose opening verifier message starts with one of ``codes``."""
    groups: list[list[int]] = []
    current: Optional[list[int]] = None
    for k, rec in enumerate(t.records):
        if rec.direction == V2P and len(rec.payload) > 1:
            current = [] if rec.payload[0] in codes else None
            if current is not None:
                groups.append(current)
        elif rec.direction == P2V and current is not None:
            current.append(k)
    return groups


def mutate_transcript(t: Transcript, m: MutationStrategy) -> Transcript:
    """Copy of ``t`` with exactly one prover-visible quantity changed.

    flip-poly-eval:r:s:delta   add delta to element s of prover message r (1-based)
    flip-answer-entry:k:delta  add delta to the value of sub-vector answer entry k
    drop-witness:level:pos     remove node pos from the heavy-hitter list of a level
    """
    if m.kind == "flip-poly-eval":
        rnd, slot, delta = m.args
        recs = _prover_records(t)
        if not 1 <= rnd <= len(recs):
            raise ValueError(f"no prover message {rnd} (transcript has {len(recs)})")
        payload = list(t.records[recs[rnd - 1]].payload)
        if not 0 <= slot < len(payload):
            raise ValueError(f"prover message {rnd} has no element {slot}")
        payload[slot] = (payload[slot] + delta) % F.P
        return _replace(t, recs[rnd - 1], payload)
    if m.kind == "flip-answer-entry":
        pos, delta = m.args
        groups = _phase_records(t, {SUBVECTOR, RANGE, INDEX, DICTIONARY})
        if not groups or not groups[0]:
            raise ValueError("transcript has no sub-vector answer")
        k = groups[0][0]
        payload = list(t.records[k].payload)
        if not 0 <= pos < payload[0]:
            raise ValueError(f"answer has {payload[0]} entries, no entry {pos}")
        payload[2 + 2 * pos] = (payload[2 + 2 * pos] + delta) % F.P
        return _replace(t, k, payload)
    if m.kind == "drop-witness":
        level, pos = m.args
        opening = [rec for rec in t.records if rec.direction == V2P and rec.payload[:1] == (HEAVY_HITTERS,)]
        groups = _phase_records(t, {HEAVY_HITTERS})
        if not groups or not 0 <= level < len(groups[0]):
            raise ValueError(f"no heavy-hitter level {level}")
        fingerprinted = bool(opening[0].payload[2])
        k = groups[0][level]
        payload = list(t.records[k].payload)
        spans = _node_spans(payload, level, fingerprinted)
        if not 0 <= pos < len(spans):
            raise ValueError(f"level {level} lists {len(spans)} nodes, no node {pos}")
        a, b = spans[pos]
        return _replace(t, k, payload[:a] + payload[b:])
    raise ValueError(f"{m.kind} changes the stream, not the transcript; use run_attack")


def live_tamper(m: MutationStrategy) -> Tamper:
    """flip-poly-eval as a live prover wrapper (adversarial servers)."""
    if m.kind != "flip-poly-eval":
        raise ValueError(f"{m.kind} cannot be applied to a live prover")
    rnd, slot, delta = m.args

    def tamper(count: int, payload: list[int]) -> list[int]:
        if count == rnd and 0 <= slot < len(payload):
            payload[slot] = (payload[slot] + delta) % F.P
        return payload
    return tamper


def _node_spans(payload: Sequence[int], level: int, fingerprinted: bool) -> list[tuple[int, int]]:
    if level == 0:
        return [(k, k + 2) for k in range(0, len(payload), 2)]
    spans = []
    pos = 0
    while pos + 1 < len(payload):
        width = (6 if fingerprinted else 2) if payload[pos + 1] == 1 else 4
        spans.append((pos, pos + width))
        pos += width
    return spans


def run_attack(session: Session, m: MutationStrategy, honest: Optional[Outcome] = None) -> Outcome:
    """Apply ``m`` to an honest run and return the verifier's verdict.

    shift-stream runs an honest prover on the stream plus one extra update
    against the verifier that saw the original stream.
    """
    if m.kind == "shift-stream":
        i, delta = m.args
        shifted = [list(s) for s in session.streams]
        shifted[0].append(StreamUpdate(i, delta))
        vectors = [FrequencyVector(session.u, s) for s in shifted]
        return session.run(SessionProver(session.u, vectors, session.dense_threshold))
    honest = honest or session.run()
    return replay(mutate_transcript(honest.transcript, m), session.verifier())


# -- benchmark ---------------------------------------------------------------------

@dataclass
class BenchRow:
    protocol: str
    u: int
    n: int
    verifier_ns_per_update: float
    prover_total_ms: float
    proof_bytes: int
    verifier_state_bytes: int
    verdict: str


@dataclass
class BenchReport:
    rows: list[BenchRow] = field(default_factory=list)

    def to_csv(self) -> str:
        out = io.StringIO()
        names = [f.name for f in fields(BenchRow)]
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(names)
        for row in self.rows:
            writer.writerow([getattr(row, n) if not isinstance(getattr(row, n), float)
                             else f"{getattr(row, n):.3f}" for n in names])
        return out.getvalue()

    def slope(self, protocol: str, column: str = "prover_total_ms") -> float:
        """Least-squares slope of log(column) against log(u)."""
        pts = {}
        for row in self.rows:
            if row.protocol == protocol:
                pts.setdefault(row.u, []).append(getattr(row, column))
        if len(pts) < 2:
            raise ValueError(f"need at least two universe sizes for {protocol}")
        xs = np.log2([u for u in sorted(pts)])
        ys = np.log2([min(pts[u]) for u in sorted(pts)])
        return float(np.polyfit(xs, ys, 1)[0])


def time_f2(counts: np.ndarray, seed: int, ingest_sample: int = 20000) -> BenchRow:
    """One F2 measurement. Verifier ingest is timed on a sample of updates;
    the LDE value of the whole vector then comes from a dense fold (the two
    agree exactly, see the LDE tests). Prover time covers building the
    table and every round."""
    u = counts.size
    params = LdeParams.for_universe(u)
    point = random_point(params.d, random.Random(seed))
    nz = np.flatnonzero(counts)[:ingest_sample]
    sample = [StreamUpdate(int(i), int(counts[i])) for i in nz]
    acc = LdeAccumulator(params, point)
    t0 = time.perf_counter_ns()
    acc.extend(sample)
    ingest_ns = (time.perf_counter_ns() - t0) / max(1, len(sample))
    fa = lde_eval_dense(F.to_array(counts), point)

    t0 = time.perf_counter()
    state = ProverState.from_vectors([F.to_array(counts)], Combiner.power(2), 2, params.d)
    prover = SumcheckProver(state)
    prover_s = time.perf_counter() - t0
    verifier = SumcheckVerifier(point, [fa], Combiner.power(2), [F2])
    msg = verifier.query()
    elements = 0
    peak = verifier.state_elements()
    while msg is not None:
        t0 = time.perf_counter()
        reply = prover.respond(msg)
        prover_s += time.perf_counter() - t0
        elements += len(reply)
        msg = verifier.receive(reply)
        peak = max(peak, verifier.state_elements())
    return BenchRow("f2", u, int(counts.sum()), ingest_ns, prover_s * 1e3,
                    elements * F.ELEMENT_BYTES, peak * F.ELEMENT_BYTES,
                    "ACCEPT" if verifier.finished else "REJECT")


def time_session(query: Query, counts: np.ndarray, seed: int, ingest_sample: int = 20000) -> BenchRow:
    updates = from_vector(counts.tolist())
    t0 = time.perf_counter_ns()
    Session.create(query, [updates[:ingest_sample]] * query.streams, counts.size, seed)
    ingest_ns = (time.perf_counter_ns() - t0) / max(1, min(len(updates), ingest_sample) * query.streams)
    session = Session.create(query, [updates] * query.streams, counts.size, seed)
    t0 = time.perf_counter()
    outcome = session.run()
    total_ms = (time.perf_counter() - t0) * 1e3
    return BenchRow(query.protocol, counts.size, int(counts.sum()), ingest_ns, total_ms,
                    outcome.transcript.proof_bytes(), outcome.max_state_elements * F.ELEMENT_BYTES,
                    outcome.verdict)


def run_benchmark(protocols: Sequence[str], log_sizes: Sequence[int], repetitions: int = 3,
                  seed: int = 1, max_count: int = 1000) -> BenchReport:
    """F2 timings split prover from verifier; other protocols time whole sessions."""
    K.warmup()
    report = BenchReport()
    for proto in protocols:
        for logu in log_sizes:
            u = 1 << logu
            for rep in range(repetitions):
                counts = stream_counts(StreamSpec(u, ("uniform", max_count), seed + rep))
                if proto == "f2":
                    report.rows.append(time_f2(counts, seed + rep))
                else:
                    report.rows.append(time_session(_bench_query(proto, u), counts, seed + rep))
    return report


def _bench_query(proto: str, u: int) -> Query:
    if proto == "subvector":
        return Query("subvector", qL=u // 3, qR=u // 3 + min(999, u // 3))
    if proto == "fk":
        return Query("fk", k=3)
    if proto == "heavy-hitters":
        return Query("heavy-hitters", phi=0.01, fingerprinted=True)
    if proto == "range-sum":
        return Query("range-sum", qL=u // 4, qR=u // 2)
    return Query(proto)
