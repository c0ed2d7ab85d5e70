import random
import socket
import threading
from fractions import Fraction

import pytest
from hypothesis import given, strategies as st

from streamproof.harness import MutationStrategy, live_tamper
from streamproof.session import Query, Session
from streamproof.transport import (ERROR, HELLO, MSG_TYPES, QUERY, ROUND_PAYLOAD, STREAM_CHUNK, VERDICT,
                                   TransportError, WireMessage, chunk_payload, decode, elements_payload,
                                   encode, hello_payload, parse_chunk, parse_elements, parse_verdict,
                                   read_message, send_message, serve_prover, verify_remote)

from conftest import EXAMPLE8_STREAM

messages = st.builds(WireMessage, st.integers(0, 2**64 - 1), st.sampled_from(sorted(MSG_TYPES)),
                     st.binary(max_size=200))


@given(messages)
def test_roundtrip(msg):
    assert decode(encode(msg)) == msg


def test_roundtrip_many():
    rng = random.Random(0)
    for _ in range(10_000):
        msg = WireMessage(rng.getrandbits(64), rng.choice(sorted(MSG_TYPES)), rng.randbytes(rng.randrange(64)))
        frame = encode(msg)
        assert decode(frame) == msg
        with pytest.raises(TransportError):
            decode(frame[:-1])


@given(messages, st.data())
def test_any_truncation_is_an_error(msg, data):
    frame = encode(msg)
    cut = data.draw(st.integers(0, len(frame) - 1))
    with pytest.raises(TransportError):
        decode(frame[:cut])


def test_frame_layout():
    frame = encode(WireMessage(5, ROUND_PAYLOAD, elements_payload([34])))
    assert frame[:4] == (8).to_bytes(4, "little")
    assert frame[4:12] == (5).to_bytes(8, "little")
    assert frame[12] == ROUND_PAYLOAD
    assert frame[13:] == bytes([0x22, 0, 0, 0, 0, 0, 0, 0])


def test_unknown_type_and_trailing_bytes():
    frame = bytearray(encode(WireMessage(1, HELLO, b"abc")))
    frame[12] = 99
    with pytest.raises(TransportError):
        decode(bytes(frame))
    with pytest.raises(TransportError):
        decode(encode(WireMessage(1, HELLO, b"abc")) + b"x")
    with pytest.raises(TransportError):
        WireMessage(1, 0)


def test_payload_helpers():
    assert parse_chunk(chunk_payload(1, [(3, -2), (7, 5)])) == (1, [(3, -2), (7, 5)])
    assert parse_elements(elements_payload([1, 2])) == [1, 2]
    with pytest.raises(TransportError):
        parse_elements(b"\xff" * 8)
    with pytest.raises(TransportError):
        parse_chunk(b"\x00" + b"\x01" * 15)
    with pytest.raises(TransportError):
        parse_verdict(b"")


@pytest.fixture(scope="module")
def server():
    with serve_prover(("127.0.0.1", 0)) as srv:
        yield srv.address


QUERIES = [Query("f2"), Query("fk", k=3), Query("range-sum", qL=1, qR=5), Query("subvector", qL=1, qR=5),
           Query("dictionary", q=3), Query("predecessor", q=6), Query("k-largest", k=2),
           Query("heavy-hitters", phi=Fraction(1, 5), fingerprinted=True), Query("f0"),
           Query("inverse", k=3), Query("fmax")]


@pytest.mark.parametrize("query", QUERIES, ids=lambda q: q.label())
def test_remote_equals_local(server, query):
    remote = verify_remote(server, [EXAMPLE8_STREAM], query, seed=7, u=8)
    local = Session.create(query, [EXAMPLE8_STREAM], 8, seed=7).run()
    assert remote.accepted and local.accepted
    assert remote.result == local.result
    assert remote.transcript.to_bytes() == local.transcript.to_bytes()


def test_remote_f2_worked_example(server):
    out = verify_remote(server, [EXAMPLE8_STREAM], Query("f2"), seed=7, u=8)
    assert out.result == 188 and out.accepted


def test_remote_inner_product(server):
    out = verify_remote(server, [EXAMPLE8_STREAM, [(0, 1), (2, 1)]], Query("inner-product"), seed=2, u=8)
    assert out.accepted and out.result == 10


def test_no_stream_then_query(server):
    for query in (Query("f2"), Query("subvector", qL=0, qR=7), Query("f0")):
        out = verify_remote(server, [[]], query, seed=1, u=8)
        assert out.accepted and out.result in (0, [])


def test_large_stream_in_chunks(server):
    stream = [(i % 1000, 1) for i in range(10_000)]
    out = verify_remote(server, [stream], Query("f2"), seed=3, u=1024)
    assert out.accepted and out.result == 1000 * 100


def test_concurrent_sessions(server):
    results = {}

    def run(k):
        results[k] = verify_remote(server, [[(k, k + 1)]], Query("f2"), seed=k, u=64).result

    threads = [threading.Thread(target=run, args=(k,)) for k in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results == {k: (k + 1) ** 2 for k in range(8)}


def test_adversarial_server_rejected():
    tamper = live_tamper(MutationStrategy.parse("flip-poly-eval:2:0:1"))
    with serve_prover(("127.0.0.1", 0), tamper) as srv:
        out = verify_remote(srv.address, [EXAMPLE8_STREAM], Query("f2"), seed=7, u=8)
    assert not out.accepted


def test_unreachable_server():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        port = s.getsockname()[1]
    with pytest.raises(TransportError):
        verify_remote(("127.0.0.1", port), [EXAMPLE8_STREAM], Query("f2"), seed=1, u=8)


def raw_session(address, frames):
    with socket.create_connection(address, timeout=5) as sock:
        for msg in frames:
            send_message(sock, msg)
        replies = []
        try:
            while True:
                replies.append(read_message(sock))
        except TransportError:
            pass
    return replies


def test_malformed_sequence_gets_error_verdict(server):
    replies = raw_session(server, [WireMessage(9, QUERY, elements_payload([1]))])
    assert replies[-1].msg_type == VERDICT and parse_verdict(replies[-1].payload)[0] == ERROR
    replies = raw_session(server, [WireMessage(9, HELLO, hello_payload(8, 1)),
                                   WireMessage(9, QUERY, elements_payload([1])),
                                   WireMessage(9, STREAM_CHUNK, chunk_payload(0, [(1, 1)]))])
    assert [m.msg_type for m in replies] == [HELLO, ROUND_PAYLOAD, VERDICT]
    replies = raw_session(server, [WireMessage(9, HELLO, hello_payload(8, 1)),
                                   WireMessage(9, STREAM_CHUNK, chunk_payload(0, [(99, 1)]))])
    assert replies[-1].msg_type == VERDICT


def test_server_abort_surfaces_as_transport_error(server):
    # no key <= 3, so the honest prover has nothing to claim and aborts
    with pytest.raises(TransportError):
        verify_remote(server, [[(5, 1)]], Query("predecessor", q=3), seed=1, u=8)
