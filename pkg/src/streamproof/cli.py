"""streamproof command line.

Exit status: 0 the verifier accepted, 1 it rejected, 2 usage or I/O error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from fractions import Fraction
from typing import Optional, Sequence

from .harness import (MutationStrategy, StreamSpec, generate_stream, live_tamper, mutate_transcript,
                      run_attack, run_benchmark)
from .protocol import Outcome, Transcript, replay
from .session import (PROTOCOLS, Query, Session, VerifierSketch, build_verifier, format_value,
                      infer_universe)
from .stream import read_stream, write_stream
from .transport import TransportError, serve_prover, verify_remote

EXIT_ACCEPT, EXIT_REJECT, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _add_query_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--protocol", required=True, choices=PROTOCOLS)
    p.add_argument("--k", type=int, help="moment order, k for k-largest, frequency for inverse")
    p.add_argument("--q", type=int, help="query index (index, dictionary, predecessor, successor)")
    p.add_argument("--qL", "--ql", dest="qL", type=int, help="range start")
    p.add_argument("--qR", "--qr", dest="qR", type=int, help="range end (inclusive)")
    p.add_argument("--phi", type=Fraction, help="heavy-hitter fraction, e.g. 1/4 or 0.1")
    p.add_argument("--fingerprinted", action="store_true", help="fingerprinted heavy-hitter variant")
    p.add_argument("--input", default="-", help="stream file, '-' for stdin (text or binary)")
    p.add_argument("--input2", help="second stream (inner-product)")
    p.add_argument("--seed", type=int, default=0, help="verifier seed")
    p.add_argument("--u", type=int, help="universe size (default: smallest power of 2 that fits)")


def _query(args) -> Query:
    k = args.k
    if args.protocol == "f2":
        k = None
    if args.protocol == "fk" and k is None:
        raise UsageError("fk needs --k")
    try:
        return Query(args.protocol, k=k, q=args.q, qL=args.qL, qR=args.qR, phi=args.phi,
                     fingerprinted=args.fingerprinted)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _streams(args, query: Query) -> list:
    streams = [read_stream(args.input)]
    if query.streams == 2:
        if not args.input2:
            raise UsageError("inner-product needs --input2")
        streams.append(read_stream(args.input2))
    return streams


def _report(query: Query, outcome: Outcome) -> int:
    if outcome.accepted:
        print(f"{query.label()} = {format_value(query, outcome.result)} ACCEPT")
        return EXIT_ACCEPT
    print(f"{query.label()} REJECT (round {outcome.failed_round}: {outcome.reason})")
    return EXIT_REJECT


def _sketch_path(args) -> str:
    return args.state or args.transcript + ".vstate"


def _load_sketch(path: str) -> VerifierSketch:
    with open(path) as fh:
        return VerifierSketch.from_json(fh.read())


def _load_transcript(path: str) -> Transcript:
    with open(path, "rb") as fh:
        return Transcript.from_bytes(fh.read())


def cmd_prove(args) -> int:
    query = _query(args)
    session = Session.create(query, _streams(args, query), args.u, args.seed)
    outcome = session.run()
    if args.transcript_out:
        with open(args.transcript_out, "wb") as fh:
            fh.write(outcome.transcript.to_bytes())
        with open(args.transcript_out + ".vstate", "w") as fh:
            fh.write(session.sketch.to_json())
    return _report(query, outcome)


def cmd_verify(args) -> int:
    sketch = _load_sketch(_sketch_path(args))
    outcome = replay(_load_transcript(args.transcript), build_verifier(sketch))
    return _report(sketch.query, outcome)


def cmd_attack(args) -> int:
    try:
        strategy = MutationStrategy.parse(args.strategy)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    if strategy.kind == "shift-stream":
        if args.input is None:
            raise UsageError("shift-stream needs the original stream (--input) and --protocol")
        query = _query(args)
        session = Session.create(query, _streams(args, query), args.u, args.seed)
        outcome = run_attack(session, strategy)
    else:
        if args.transcript is None:
            raise UsageError(f"{strategy.kind} needs --transcript")
        sketch = _load_sketch(_sketch_path(args))
        query = sketch.query
        mutated = mutate_transcript(_load_transcript(args.transcript), strategy)
        outcome = replay(mutated, build_verifier(sketch))
    print(f"attack {strategy}: ", end="")
    return _report(query, outcome)


def _log_sizes(text: str) -> list[int]:
    if ".." in text:
        lo, hi = text.split("..")
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def cmd_bench(args) -> int:
    protocols = args.protocols.split(",")
    for p in protocols:
        if p not in PROTOCOLS:
            raise UsageError(f"unknown protocol {p!r}")
    report = run_benchmark(protocols, _log_sizes(args.log_sizes), args.reps, args.seed, args.max_count)
    text = report.to_csv()
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if "f2" in protocols and len(set(_log_sizes(args.log_sizes))) > 1:
        print(f"# f2 prover log-log slope {report.slope('f2'):.3f}", file=sys.stderr)
    return EXIT_ACCEPT if all(r.verdict == "ACCEPT" for r in report.rows) else EXIT_REJECT


def cmd_serve(args) -> int:
    tamper = live_tamper(MutationStrategy.parse(args.mutate)) if args.mutate else None
    server = serve_prover((args.host, args.port), tamper)
    host, port = server.address
    print(f"serving on {host}:{port}", flush=True)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return EXIT_ACCEPT


def cmd_query(args) -> int:
    query = _query(args)
    streams = _streams(args, query)
    u = args.u if args.u is not None else infer_universe(query, streams)
    outcome = verify_remote((args.host, args.port), streams, query, args.seed, u)
    return _report(query, outcome)


def cmd_gen(args) -> int:
    spec = StreamSpec.parse(args.u, args.dist, args.seed, args.unit)
    updates = generate_stream(spec)
    if args.out and args.out != "-":
        with open(args.out, "wb") as fh:
            write_stream(updates, fh, args.binary)
    else:
        write_stream(updates, sys.stdout.buffer, args.binary)
        sys.stdout.flush()
    return EXIT_ACCEPT


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="streamproof",
                                     description="Verifiable streaming queries: prove, verify, attack, benchmark.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("prove", help="run a protocol in-process and print value and verdict")
    _add_query_args(p)
    p.add_argument("--transcript-out", help="write the transcript here (plus a .vstate sidecar)")
    p.set_defaults(func=cmd_prove)

    p = sub.add_parser("verify", help="replay a saved transcript")
    p.add_argument("--transcript", required=True)
    p.add_argument("--state", help="verifier state file (default: TRANSCRIPT.vstate)")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("attack", help="mutate one prover message or the stream and re-verify")
    p.add_argument("--strategy", required=True,
                   help="flip-poly-eval:r:s:delta | flip-answer-entry:k:delta | "
                        "drop-witness:level:pos | shift-stream:i:delta")
    p.add_argument("--transcript")
    p.add_argument("--state")
    p.add_argument("--protocol", choices=PROTOCOLS)
    p.add_argument("--k", type=int)
    p.add_argument("--q", type=int)
    p.add_argument("--qL", "--ql", dest="qL", type=int)
    p.add_argument("--qR", "--qr", dest="qR", type=int)
    p.add_argument("--phi", type=Fraction)
    p.add_argument("--fingerprinted", action="store_true")
    p.add_argument("--input")
    p.add_argument("--input2")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--u", type=int)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("bench", help="timing table as CSV")
    p.add_argument("--protocols", default="f2", help="comma-separated protocol names")
    p.add_argument("--log-sizes", default="16..22", help="e.g. 16..22 or 10,12,14")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--seed", type=int, default=1)
    p.add_argument("--max-count", type=int, default=1000)
    p.add_argument("--out")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run a prover service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7300)
    p.add_argument("--mutate", help="adversarial build: flip-poly-eval:r:s:delta on every session")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("query", help="stream to a remote prover and verify its answer")
    _add_query_args(p)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7300)
    p.set_defaults(func=cmd_query)

    p = sub.add_parser("gen", help="generate a synthetic stream")
    p.add_argument("--u", type=int, required=True)
    p.add_argument("--dist", default="uniform:1000", help="uniform:M | zipf:s:n | explicit:a,b,...")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unit", action="store_true", help="split counts into +1 updates")
    p.add_argument("--binary", action="store_true")
    p.add_argument("--out", help="output file (default stdout)")
    p.set_defaults(func=cmd_gen)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_ACCEPT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"streamproof: {exc}", file=sys.stderr)
    except TransportError as exc:
        print(f"streamproof: transport error: {exc}", file=sys.stderr)
    except (OSError, ValueError, IndexError) as exc:
        print(f"streamproof: {exc}", file=sys.stderr)
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
