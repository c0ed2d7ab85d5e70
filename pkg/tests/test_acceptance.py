"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

The lines are also collected by conftest.py and repeated in the pytest
terminal summary, so they show up without ``-s``.
"""

import math
import random
import time
from fractions import Fraction

import pytest

from streamproof import _kernels as K
from streamproof import field as F
from streamproof.freqstat import stat_degree
from streamproof.harness import MutationStrategy, live_tamper, mutate_transcript, run_attack, run_benchmark
from streamproof.heavy import heavy_threshold
from streamproof.lde import LdeAccumulator, LdeParams, lde_direct_eval, random_point
from streamproof.protocol import P2V, V2P, replay
from streamproof.session import (DICTIONARY, HEAVY_HITTERS, INDEX, RANGE, RESIDUAL_SUM, SUBVECTOR, Query, Session,
                                 SessionProver, TamperingProver, run_subvector)
from streamproof.stream import FrequencyVector, StreamUpdate
from streamproof.transport import serve_prover, verify_remote
from streamproof.vtree import prover_subvector_message, tree_levels

from conftest import EXAMPLE8, EXAMPLE8_STREAM, record_criterion

P = F.P

PROTOCOLS14 = ["f2", "f3", "inner-product", "range-sum", "subvector", "index", "dictionary",
               "predecessor", "range", "k-largest", "heavy-hitters", "f0", "inverse", "fmax"]
SIGNED = {"f2", "f3", "inner-product", "range-sum", "subvector", "index", "range"}
SUBVECTOR_CODES = {SUBVECTOR, RANGE, INDEX, DICTIONARY}


def report(number, ok, detail):
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    print(line)
    record_criterion(line)
    assert ok, line


# -- random instances ------------------------------------------------------------

class Instance:
    def __init__(self, name, query, streams, u, seed, vectors):
        self.name, self.query, self.streams, self.u, self.seed = name, query, streams, u, seed
        self.vectors = vectors  # dict index -> final count, per stream

    def session(self):
        return Session.create(self.query, self.streams, self.u, self.seed)


def _vector(rng, u, signed):
    keys = rng.sample(range(u), rng.randint(0, min(u, 200)))
    cap = rng.choice([1, 3, 40, 1000, 10**6])
    vec = {}
    for k in keys:
        v = rng.randint(1, cap)
        vec[k] = -v if signed and rng.random() < 0.3 else v
    return vec


def _stream(rng, vec, u):
    """Updates whose sum is vec: values split into pieces, plus cancelling pairs."""
    out = []
    for k, v in vec.items():
        parts = rng.randint(1, 3)
        for _ in range(parts - 1):
            piece = rng.randint(-5, 5)
            out.append((k, piece))
            v -= piece
        out.append((k, v))
    for _ in range(rng.randint(0, 5)):
        k, c = rng.randrange(u), rng.randint(1, 9)
        out += [(k, c), (k, -c)]
    rng.shuffle(out)
    return out


def random_instance(rng, name, dmin=4, dmax=12, unique_max=False):
    d = rng.randint(dmin, dmax)
    u = 1 << d
    seed = rng.randrange(1 << 30)
    vec = _vector(rng, u, name in SIGNED)
    if name == "predecessor":
        vec[0] = max(vec.get(0, 0), 1)
    if unique_max and vec:
        top = max(vec, key=vec.get)
        vec[top] += 1
    present = sorted(k for k, v in vec.items() if v)

    def pick_index():
        return rng.choice(present) if present and rng.random() < 0.5 else rng.randrange(u)

    def pick_range():
        a, b = pick_index(), pick_index()
        return min(a, b), max(a, b)

    streams = [_stream(rng, vec, u)]
    vectors = [vec]
    if name == "f2":
        query = Query("f2")
    elif name == "f3":
        query = Query("fk", k=3)
    elif name == "inner-product":
        other = _vector(rng, u, True)
        streams.append(_stream(rng, other, u))
        vectors.append(other)
        query = Query("inner-product")
    elif name in ("range-sum", "subvector", "range"):
        qL, qR = pick_range()
        query = Query(name, qL=qL, qR=qR)
    elif name == "index":
        query = Query("index", q=pick_index())
    elif name == "dictionary":
        # one insertion per key; stored values may be 0
        vec = {k: rng.randint(0, 50) for k in vec}
        vectors = [vec]
        streams = [list(vec.items())]
        present = sorted(vec)
        query = Query("dictionary", q=pick_index())
    elif name == "predecessor":
        query = Query("predecessor", q=pick_index())
    elif name == "k-largest":
        query = Query("k-largest", k=rng.randint(1, 8))
    elif name == "heavy-hitters":
        query = Query("heavy-hitters", phi=Fraction(1, rng.randint(1, 30)), fingerprinted=rng.random() < 0.5)
    elif name == "f0":
        query = Query("f0")
    elif name == "inverse":
        values = [v for v in vec.values() if v]
        k = rng.choice(values) if values and rng.random() < 0.7 else rng.randint(0, 5)
        query = Query("inverse", k=k)
    elif name == "fmax":
        query = Query("fmax")
    else:
        raise ValueError(name)
    return Instance(name, query, streams, u, seed, vectors)


def oracle(inst):
    """Brute-force answer from the explicit final vector(s)."""
    q = inst.query
    a = inst.vectors[0]
    items = sorted((i, v) for i, v in a.items() if v)
    if inst.name == "f2":
        return sum(v * v for _, v in items) % P
    if inst.name == "f3":
        return sum(v**3 for _, v in items) % P
    if inst.name == "inner-product":
        b = inst.vectors[1]
        return sum(v * b.get(i, 0) for i, v in items) % P
    if inst.name == "range-sum":
        return sum(v for i, v in items if q.qL <= i <= q.qR) % P
    if inst.name in ("subvector", "range"):
        return [(i, v) for i, v in items if q.qL <= i <= q.qR]
    if inst.name == "index":
        return a.get(q.q, 0)
    if inst.name == "dictionary":
        return a[q.q] if q.q in a else None
    if inst.name == "predecessor":
        return max(i for i, _ in items if i <= q.q)
    if inst.name == "k-largest":
        return items[-q.k:] if items else []
    if inst.name == "heavy-hitters":
        tau = heavy_threshold(q.phi, sum(v for _, v in items))
        return [(i, v) for i, v in items if v >= tau]
    if inst.name == "f0":
        return len(items)
    if inst.name == "inverse":
        hist = {}
        for _, v in items:
            hist[v] = hist.get(v, 0) + 1
        return hist.get(q.k, 0) if q.k else inst.u - len(items)
    if inst.name == "fmax":
        return max([v for _, v in items], default=0)
    raise ValueError(inst.name)


def phase_codes(transcript):
    code, out = None, []
    for rec in transcript.records:
        if rec.direction == V2P and len(rec.payload) > 1:
            code = rec.payload[0]
        out.append(code)
    return out


def communication_problems(inst, outcome):
    """Exact message-size checks for the aggregation, sub-vector and statistic runs."""
    d = (inst.u - 1).bit_length()
    t = outcome.transcript
    msgs = t.prover_messages()
    if inst.name == "f2":
        if len(msgs) != d or any(len(m) != 3 for m in msgs):
            return f"F2 proof shape {[len(m) for m in msgs]}"
    if inst.name == "f3":
        if len(msgs) != d or any(len(m) != 4 for m in msgs):
            return f"F3 proof shape {[len(m) for m in msgs]}"
    if inst.name in ("subvector", "range", "index", "dictionary"):
        entries = msgs[0][0]
        if t.element_count() > 4 * d + 2 * entries:
            return f"sub-vector transcript {t.element_count()} > 4*{d} + 2*{entries}"
    if inst.name in ("f0", "inverse", "fmax"):
        T = stat_degree(inst.u)
        for code, rec in zip(phase_codes(t), t.records):
            if code == RESIDUAL_SUM and rec.direction == P2V and len(rec.payload) > T + 1:
                return f"statistic round carries {len(rec.payload)} > {T + 1}"
    return None


def state_problem(inst, outcome):
    d = (inst.u - 1).bit_length()
    peak = outcome.max_state_elements
    if inst.name in ("f2", "f3", "inner-product", "range-sum", "subvector", "index", "dictionary",
                     "predecessor", "range", "k-largest"):
        if peak > d + 4:
            return f"{inst.name} state {peak} > {d + 4}"
    if inst.name == "heavy-hitters" and inst.query.fingerprinted and peak > 3 * d + 8:
        return f"fingerprinted HH state {peak} > {3 * d + 8}"
    return None


# -- criterion 1 -----------------------------------------------------------------

def test_criterion_1_worked_example():
    t0 = time.perf_counter()
    seeds = (1, 1, 1)
    levels = tree_levels(EXAMPLE8, seeds)
    checks = {
        "root 34": levels[-1] == [34],
        "level-1 hashes 5, 9, 13": levels[1][:3] == [5, 9, 13],
        "sibling 7": prover_subvector_message(EXAMPLE8, 1, 1, 5, seeds[:1]) == [7],
    }
    out = run_subvector(EXAMPLE8_STREAM, 1, 5, seed=1)
    answer = out.transcript.prover_messages()[0]
    checks["answer [3,8,1,7,6]"] = [v for _, v in out.result or []] == [3, 8, 1, 7, 6]
    checks["extra a_0 = 2"] = answer[-1] == 2 and answer[0] == 5
    checks["honest run accepts"] = out.accepted
    elapsed = time.perf_counter() - t0
    checks["runtime < 1 s"] = elapsed < 1.0
    bad = [k for k, ok in checks.items() if not ok]
    report(1, not bad, f"worked example tree/answer/sibling exact ({elapsed:.3f}s)" + (f"; failed {bad}" if bad else ""))


# -- criteria 2, 4, 6, 8 (one pass over the completeness trials) ------------------

@pytest.fixture(scope="module")
def completeness_run():
    K.warmup()
    rng = random.Random(20240601)
    stats = {name: {"trials": 0, "accepted": 0, "mismatch": [], "comm": [], "state": [], "peak": 0}
             for name in PROTOCOLS14}
    t0 = time.perf_counter()
    for trial in range(1000):
        for name in PROTOCOLS14:
            inst = random_instance(rng, name)
            out = inst.session().run()
            s = stats[name]
            s["trials"] += 1
            if not out.accepted:
                s["mismatch"].append(f"trial {trial} rejected: {out.reason}")
                continue
            s["accepted"] += 1
            if out.result != oracle(inst):
                s["mismatch"].append(f"trial {trial}: {out.result!r} != {oracle(inst)!r}")
            problem = communication_problems(inst, out)
            if problem:
                s["comm"].append(problem)
            problem = state_problem(inst, out)
            if problem:
                s["state"].append(problem)
            key = "peak_fp" if inst.name == "heavy-hitters" and inst.query.fingerprinted else "peak"
            s[key] = max(s.get(key, 0), out.max_state_elements)
    return stats, time.perf_counter() - t0


def test_criterion_2_completeness(completeness_run):
    stats, elapsed = completeness_run
    rates = {n: s["accepted"] / s["trials"] for n, s in stats.items()}
    ok = all(r == 1.0 for r in rates.values()) and all(s["trials"] == 1000 for s in stats.values())
    ok = ok and elapsed < 300
    worst = min(rates, key=rates.get)
    report(2, ok, f"14 protocols x 1000 trials, u in 2^4..2^12, min accept rate {rates[worst]:.4f} "
                  f"({worst}), {elapsed:.1f}s of 300s")


def test_criterion_4_oracle_equivalence(completeness_run):
    stats, _ = completeness_run
    wrong = [(n, m) for n, s in stats.items() for m in s["mismatch"] if "rejected" not in m]
    checked = sum(s["accepted"] for s in stats.values())
    report(4, not wrong, f"{checked} accepted trials compared with brute force, {len(wrong)} discrepancies"
                         + (f"; first {wrong[0]}" if wrong else ""))


def test_criterion_6_communication(completeness_run):
    stats, _ = completeness_run
    bad = [(n, p) for n, s in stats.items() for p in s["comm"]]
    report(6, not bad, "F2 = d x 3, F3 rounds = 4 elements, sub-vector <= 4d + 2*entries, "
                       f"statistic rounds <= ceil(sqrt u)+1 on every run; {len(bad)} violations"
                       + (f"; first {bad[0]}" if bad else ""))


def test_criterion_8_verifier_space(completeness_run):
    stats, _ = completeness_run
    bad = [(n, p) for n, s in stats.items() for p in s["state"]]
    peaks = ", ".join(f"{n}{' (verbose)' if n == 'heavy-hitters' else ''} {s['peak']}" for n, s in stats.items())
    peaks += f", fingerprinted heavy-hitters {stats['heavy-hitters']['peak_fp']} (others measured only)"
    report(8, not bad, f"state <= d+4 (aggregation/sub-vector/reporting), <= 3d+8 (fingerprinted HH); "
                       f"{len(bad)} violations; peaks at d<=12: {peaks}" + (f"; first {bad[0]}" if bad else ""))


# -- criterion 3 -----------------------------------------------------------------

def _random_flip(rng, msgs):
    slots = [(r, s) for r, m in enumerate(msgs, 1) for s in range(len(m))]
    if not slots:
        return None  # e.g. no heavy hitters in an empty stream: nothing to flip
    r, s = rng.choice(slots)
    return MutationStrategy("flip-poly-eval", (r, s, rng.randrange(1, P)))


def _random_mutation(rng, inst, honest):
    """One mutation that changes the transcript or the prover's stream."""
    msgs = honest.transcript.prover_messages()
    kinds = ["flip-poly-eval"] * 3
    if inst.name != "inner-product" or any(inst.vectors[1].values()):
        # with b = 0 a shift of a changes neither the answer nor any message
        kinds.append("shift-stream")
    codes = {rec.payload[0] for rec in honest.transcript.records if rec.direction == V2P and len(rec.payload) > 1}
    first_answer = next((rec.payload for code, rec in zip(phase_codes(honest.transcript), honest.transcript.records)
                         if code in SUBVECTOR_CODES and rec.direction == P2V), None)
    if first_answer and first_answer[0] > 0:
        kinds.append("flip-answer-entry")
    if HEAVY_HITTERS in codes:
        kinds.append("drop-witness")
    kind = rng.choice(kinds)
    delta = rng.randrange(1, P)
    if kind == "flip-poly-eval" and _random_flip(rng, msgs):
        return _random_flip(rng, msgs)
    if kind == "flip-answer-entry":
        return MutationStrategy(kind, (rng.randrange(first_answer[0]), delta))
    if kind == "drop-witness":
        hh = [rec.payload for code, rec in zip(phase_codes(honest.transcript), honest.transcript.records)
              if code == HEAVY_HITTERS and rec.direction == P2V]
        options = [(lvl, pos) for lvl, m in enumerate(hh) for pos in range(8) if m]
        if options:
            lvl, pos = rng.choice(options)
            return MutationStrategy(kind, (lvl, pos))
    i = rng.randrange(inst.u)
    shift = rng.randint(1, 50) if inst.name not in SIGNED else rng.choice([-1, 1]) * rng.randint(1, 50)
    return MutationStrategy("shift-stream", (i, shift))


def test_criterion_3_soundness():
    K.warmup()
    rng = random.Random(777)
    t0 = time.perf_counter()
    attacks = accepted = 0
    by_kind = {}
    failures = []
    while attacks < 10_000:
        name = PROTOCOLS14[attacks // 10 % len(PROTOCOLS14)]
        inst = random_instance(rng, name, 4, 10, unique_max=name == "fmax")
        session = inst.session()
        honest = session.run()
        assert honest.accepted, honest.reason
        for _ in range(10):
            m = _random_mutation(rng, inst, honest)
            try:
                if m.kind == "shift-stream":
                    out = run_attack(session, m)
                else:
                    out = replay(mutate_transcript(honest.transcript, m), session.verifier())
            except ValueError:
                # the mutation does not apply to this transcript (e.g. too few witness nodes)
                m = _random_flip(rng, honest.transcript.prover_messages())
                out = replay(mutate_transcript(honest.transcript, m), session.verifier())
            attacks += 1
            by_kind[m.kind] = by_kind.get(m.kind, 0) + 1
            if out.accepted:
                accepted += 1
                failures.append(f"{name} {m} -> {out.result!r}")
    elapsed = time.perf_counter() - t0
    ok = accepted == 0 and elapsed < 600
    kinds = ", ".join(f"{k} {v}" for k, v in sorted(by_kind.items()))
    report(3, ok, f"{attacks} single-mutation attacks ({kinds}), {accepted} accepted, {elapsed:.1f}s of 600s"
                  + (f"; first {failures[0]}" if failures else ""))


# -- criterion 5 -----------------------------------------------------------------

def test_criterion_5_lde_cross_checks():
    rng = random.Random(5)
    mismatches = 0
    checks = 0
    for d in range(1, 9):
        u = 1 << d
        params = LdeParams(2, d, u)
        a = [rng.randint(-1000, 1000) for _ in range(u)]
        updates = [StreamUpdate(i, v) for i, v in enumerate(a) if v]
        grid = [tuple((m >> j) & 1 for j in range(d)) for m in range(u)]
        points = grid + [random_point(d, rng) for _ in range(100)]
        for r in points:
            acc = LdeAccumulator(params, r).extend(updates).value
            checks += 1
            if acc != lde_direct_eval(a, r):
                mismatches += 1
        for m, r in enumerate(grid):
            if lde_direct_eval(a, r) != a[m] % P:
                mismatches += 1
    tree_bad = 0
    for _ in range(100):
        d = rng.randint(1, 8)
        a = [rng.randint(-50, 50) for _ in range(1 << d)]
        r = random_point(d, rng)
        if tree_levels(a, r, modified=True)[-1] != [lde_direct_eval(a, r)]:
            tree_bad += 1
    report(5, mismatches == 0 and tree_bad == 0,
           f"accumulator = direct evaluation at {checks} points (u <= 256, full grid + 100 random per size), "
           f"{mismatches} mismatches; modified-tree root = LDE on 100 instances, {tree_bad} mismatches")


# -- criterion 7 -----------------------------------------------------------------

def test_criterion_7_scaling():
    t0 = time.perf_counter()
    bench = run_benchmark(["f2"], range(16, 23), repetitions=3, seed=1)
    slope = bench.slope("f2", "prover_total_ms")
    per_update = {}
    for row in bench.rows:
        per_update[row.u] = min(per_update.get(row.u, math.inf), row.verifier_ns_per_update)
    ratio = per_update[1 << 22] / per_update[1 << 16]
    elapsed = time.perf_counter() - t0
    ok = 0.85 <= slope <= 1.15 and ratio <= 2.0 and elapsed < 900 and all(r.verdict == "ACCEPT" for r in bench.rows)
    report(7, ok, f"F2 prover log-log slope {slope:.3f} (band 0.85..1.15), verifier ns/update "
                  f"2^22 / 2^16 = {ratio:.2f} (<= 2), {elapsed:.1f}s of 900s")


# -- criterion 9 -----------------------------------------------------------------

def test_criterion_9_transport_equivalence():
    rng = random.Random(99)
    tamper = live_tamper(MutationStrategy("flip-poly-eval", (1, 0, 1)))
    differences = []
    rejects = tampered = 0
    with serve_prover(("127.0.0.1", 0)) as honest_srv, serve_prover(("127.0.0.1", 0), tamper) as bad_srv:
        for k in range(100):
            inst = random_instance(rng, rng.choice(PROTOCOLS14), 4, 10)
            adversarial = k % 5 == 4
            srv = bad_srv if adversarial else honest_srv
            remote = verify_remote(srv.address, inst.streams, inst.query, inst.seed, inst.u)
            session = inst.session()
            prover = SessionProver(inst.u, [FrequencyVector(inst.u, s) for s in session.streams])
            local = session.run(TamperingProver(prover, tamper) if adversarial else prover)
            tampered += adversarial
            rejects += not remote.accepted
            if remote.transcript.to_bytes() != local.transcript.to_bytes() or remote.verdict != local.verdict:
                differences.append(f"session {k} ({inst.name})")
    report(9, not differences, f"100 sessions ({tampered} against a tampering server, {rejects} rejected; a tamper "
                               f"aimed at an empty message is a no-op), remote and in-process transcripts "
                               f"byte-identical with equal verdicts; {len(differences)} differences"
                               + (f"; first {differences[0]}" if differences else ""))
