"""Prover and verifier as separate processes over TCP.

Every message is one frame

    length: u32 | session: u64 | msg_type: u8 | payload: length bytes

little endian, where ``length`` counts payload bytes only. A session is one
connection:

    client                          server
    hello(version, u, streams)  ->
                                <-  hello(version)
    stream-chunk(k, updates)*   ->
    query(elements)             ->
                                <-  round-payload(elements)
    round-payload(elements)     ->  (repeated until the verifier is done)
    verdict(status, reason)     ->

A server that cannot go on sends verdict(ERROR, reason) and hangs up.
The verifier's randomness never leaves the client except as the protocol
reveals it, so the remote transcript matches the in-process one exactly.
"""

from __future__ import annotations

import logging
import secrets
import socket
import socketserver
import struct
import threading
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

from . import field as F
from .protocol import Outcome, Prover, ProtocolError, Tamper, interact
from .session import Query, SessionProver, TamperingProver, VerifierSketch, build_verifier
from .stream import FrequencyVector, StreamUpdate, universe_params
from .sumcheck import DENSE_THRESHOLD

log = logging.getLogger(__name__)

VERSION = 1
HELLO, STREAM_CHUNK, QUERY, ROUND_PAYLOAD, VERDICT = 1, 2, 3, 4, 5
MSG_TYPES = {HELLO: "hello", STREAM_CHUNK: "stream-chunk", QUERY: "query",
             ROUND_PAYLOAD: "round-payload", VERDICT: "verdict"}
ACCEPT, REJECT, ERROR = 0, 1, 2

MAX_PAYLOAD = 1 << 26
CHUNK_UPDATES = 4096

_FRAME = struct.Struct("<IQB")
_HELLO = struct.Struct("<HQB")
_UPDATE = struct.Struct("<Qq")


class TransportError(Exception):
    """The connection or the framing failed; says nothing about the proof."""


@dataclass(frozen=True)
class WireMessage:
    session: int
    msg_type: int
    payload: bytes = b""

    def __post_init__(self):
        if self.msg_type not in MSG_TYPES:
            raise TransportError(f"unknown message type {self.msg_type}")
        if not 0 <= self.session < 1 << 64:
            raise TransportError("session id must fit in 64 bits")

    @property
    def kind(self) -> str:
        return MSG_TYPES[self.msg_type]


def encode(msg: WireMessage) -> bytes:
    if len(msg.payload) > MAX_PAYLOAD:
        raise TransportError(f"payload of {len(msg.payload)} bytes is too large")
    return _FRAME.pack(len(msg.payload), msg.session, msg.msg_type) + msg.payload


def decode(frame: bytes) -> WireMessage:
    """Inverse of :func:`encode`; the frame must be complete and exact."""
    if len(frame) < _FRAME.size:
        raise TransportError("truncated frame header")
    length, session, msg_type = _FRAME.unpack_from(frame)
    if msg_type not in MSG_TYPES:
        raise TransportError(f"unknown message type {msg_type}")
    if length > MAX_PAYLOAD:
        raise TransportError(f"payload length {length} exceeds the limit")
    body = frame[_FRAME.size:]
    if len(body) < length:
        raise TransportError(f"truncated frame: {len(body)} of {length} payload bytes")
    if len(body) > length:
        raise TransportError(f"{len(body) - length} bytes after the frame")
    return WireMessage(session, msg_type, bytes(body))


def _recv_exact(sock: socket.socket, n: int) -> bytes:
    buf = bytearray()
    while len(buf) < n:
        try:
            part = sock.recv(n - len(buf))
        except OSError as exc:
            raise TransportError(f"receive failed: {exc}") from exc
        if not part:
            raise TransportError("connection closed mid-frame" if buf else "connection closed")
        buf += part
    return bytes(buf)


def read_message(sock: socket.socket) -> WireMessage:
    header = _recv_exact(sock, _FRAME.size)
    length = _FRAME.unpack(header)[0]
    if length > MAX_PAYLOAD:
        raise TransportError(f"payload length {length} exceeds the limit")
    return decode(header + _recv_exact(sock, length))


def send_message(sock: socket.socket, msg: WireMessage) -> None:
    try:
        sock.sendall(encode(msg))
    except OSError as exc:
        raise TransportError(f"send failed: {exc}") from exc


# payload helpers

def hello_payload(u: int, streams: int) -> bytes:
    return _HELLO.pack(VERSION, u, streams)


def parse_hello(payload: bytes) -> tuple[int, int, int]:
    if len(payload) != _HELLO.size:
        raise TransportError("malformed hello")
    return _HELLO.unpack(payload)


def chunk_payload(stream: int, updates: Sequence[StreamUpdate]) -> bytes:
    return bytes([stream]) + b"".join(_UPDATE.pack(i, d) for i, d in updates)


def parse_chunk(payload: bytes) -> tuple[int, list[StreamUpdate]]:
    if not payload or (len(payload) - 1) % _UPDATE.size:
        raise TransportError("malformed stream chunk")
    return payload[0], [StreamUpdate(i, d) for i, d in _UPDATE.iter_unpack(payload[1:])]


def elements_payload(values: Iterable[int]) -> bytes:
    return F.encode_elements(values)


def parse_elements(payload: bytes) -> list[int]:
    if len(payload) % F.ELEMENT_BYTES:
        raise TransportError("element payload is not a multiple of 8 bytes")
    values = F.decode_elements(payload)
    if any(v >= F.P for v in values):
        raise TransportError("element outside the field")
    return values


def verdict_payload(status: int, reason: str = "") -> bytes:
    return bytes([status]) + reason.encode("utf-8")


def parse_verdict(payload: bytes) -> tuple[int, str]:
    if not payload:
        raise TransportError("empty verdict")
    return payload[0], payload[1:].decode("utf-8", "replace")


# -- server ------------------------------------------------------------------------

class _SessionHandler(socketserver.BaseRequestHandler):
    server: "ProverServer"

    def handle(self):
        sock = self.request
        session = None
        try:
            first = read_message(sock)
            session = first.session
            if first.msg_type != HELLO:
                raise TransportError("session must open with hello")
            version, u, nstreams = parse_hello(first.payload)
            if version != VERSION:
                raise TransportError(f"unsupported protocol version {version}")
            size, _ = universe_params(u)
            send_message(sock, WireMessage(session, HELLO, struct.pack("<H", VERSION)))
            vectors = [FrequencyVector(size) for _ in range(nstreams)]
            prover: Optional[Prover] = None
            while True:
                msg = read_message(sock)
                if msg.session != session:
                    raise TransportError("session id changed mid-session")
                if msg.msg_type == STREAM_CHUNK:
                    if prover is not None:
                        raise TransportError("stream chunk after the query")
                    k, updates = parse_chunk(msg.payload)
                    if k >= nstreams:
                        raise TransportError(f"no stream {k}")
                    for upd in updates:
                        vectors[k].update(upd)
                elif msg.msg_type in (QUERY, ROUND_PAYLOAD):
                    if (msg.msg_type == QUERY) != (prover is None):
                        raise TransportError("query must come first, exactly once")
                    if prover is None:
                        prover = self.server.make_prover(size, vectors)
                    reply = prover.respond(parse_elements(msg.payload))
                    send_message(sock, WireMessage(session, ROUND_PAYLOAD, elements_payload(reply)))
                elif msg.msg_type == VERDICT:
                    status, reason = parse_verdict(msg.payload)
                    log.info("session %x closed: status %d %s", session, status, reason)
                    return
                else:
                    raise TransportError(f"unexpected {msg.kind} from client")
        except (TransportError, ProtocolError, IndexError, ValueError) as exc:
            log.info("session %s aborted: %s", session, exc)
            if session is not None:
                try:
                    send_message(sock, WireMessage(session, VERDICT, verdict_payload(ERROR, str(exc))))
                except TransportError:
                    pass


class ProverServer(socketserver.ThreadingTCPServer):
    """One thread per connection; sessions share only the configuration."""

    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address: tuple[str, int], tamper: Optional[Tamper] = None,
                 dense_threshold: int = DENSE_THRESHOLD):
        self.tamper = tamper
        self.dense_threshold = dense_threshold
        self._thread: Optional[threading.Thread] = None
        super().__init__(address, _SessionHandler)

    def make_prover(self, u: int, vectors: Sequence[FrequencyVector]) -> Prover:
        p = SessionProver(u, vectors, self.dense_threshold)
        return TamperingProver(p, self.tamper) if self.tamper else p

    @property
    def address(self) -> tuple[str, int]:
        return self.server_address[:2]

    def start(self) -> "ProverServer":
        """Serve from a background thread (tests, embedding)."""
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self) -> None:
        self.shutdown()
        self.server_close()
        if self._thread is not None:
            self._thread.join()

    def __enter__(self):
        return self.start() if self._thread is None else self

    def __exit__(self, *exc):
        self.stop()


def serve_prover(address: tuple[str, int], tamper: Optional[Tamper] = None,
                 dense_threshold: int = DENSE_THRESHOLD) -> ProverServer:
    """Bind a prover service; call ``serve_forever()`` or ``start()`` on it."""
    return ProverServer(address, tamper, dense_threshold)


# -- client ------------------------------------------------------------------------

class RemoteProver(Prover):
    """Prover stub: each verifier message goes over the wire, the reply comes back."""

    def __init__(self, sock: socket.socket, session: int):
        self.sock = sock
        self.session = session
        self.sent_query = False

    def respond(self, payload):
        kind = ROUND_PAYLOAD if self.sent_query else QUERY
        self.sent_query = True
        send_message(self.sock, WireMessage(self.session, kind, elements_payload(payload)))
        reply = read_message(self.sock)
        if reply.session != self.session:
            raise TransportError("reply for another session")
        if reply.msg_type == VERDICT:
            status, reason = parse_verdict(reply.payload)
            raise TransportError(f"server aborted the session: {reason}")
        if reply.msg_type != ROUND_PAYLOAD:
            raise TransportError(f"expected round-payload, got {reply.kind}")
        return parse_elements(reply.payload)

    @property
    def done(self) -> bool:
        return False


def _prepared(query: Query, stream: Iterable):
    for upd in stream:
        yield from query.prepare([upd])


def verify_remote(address: tuple[str, int], streams: Sequence[Iterable], query: Query,
                  seed: int, u: int, timeout: Optional[float] = 30.0) -> Outcome:
    """Stream updates to a remote prover while keeping only the sketch, then
    run the protocol against it. Same result contract as the in-process runs;
    a :class:`TransportError` means the network or server failed, not the proof."""
    if len(streams) != query.streams:
        raise ValueError(f"{query.protocol} takes {query.streams} stream(s)")
    size, _ = universe_params(u)
    sketch = VerifierSketch(query, size, seed)
    session = secrets.randbits(64)
    try:
        sock = socket.create_connection(address, timeout=timeout)
    except OSError as exc:
        raise TransportError(f"cannot reach {address[0]}:{address[1]}: {exc}") from exc
    with sock:
        send_message(sock, WireMessage(session, HELLO, hello_payload(size, query.streams)))
        reply = read_message(sock)
        if reply.msg_type != HELLO or reply.session != session:
            raise TransportError("server did not answer hello")
        for k, stream in enumerate(streams):
            chunk: list[StreamUpdate] = []
            for upd in _prepared(query, stream):
                if not 0 <= upd[0] < size:
                    raise ValueError(f"index {upd[0]} outside universe [0, {size})")
                sketch.update(upd, k)
                chunk.append(upd)
                if len(chunk) == CHUNK_UPDATES:
                    send_message(sock, WireMessage(session, STREAM_CHUNK, chunk_payload(k, chunk)))
                    chunk = []
            if chunk:
                send_message(sock, WireMessage(session, STREAM_CHUNK, chunk_payload(k, chunk)))
        outcome = interact(RemoteProver(sock, session), build_verifier(sketch))
        status = ACCEPT if outcome.accepted else REJECT
        send_message(sock, WireMessage(session, VERDICT, verdict_payload(status, outcome.reason or "")))
    return outcome
