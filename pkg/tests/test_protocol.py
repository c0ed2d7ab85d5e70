import pytest
from hypothesis import given, strategies as st

from streamproof.field import P
from streamproof.protocol import P2V, V2P, Transcript, replay
from streamproof.session import Query, Session

from conftest import EXAMPLE8_STREAM

payloads = st.lists(st.integers(0, P - 1), max_size=6)


@given(st.lists(st.tuples(st.integers(1, 60), st.sampled_from([V2P, P2V]), payloads), max_size=12))
def test_transcript_roundtrip(records):
    t = Transcript()
    for rnd, direction, payload in records:
        t.add(rnd, direction, payload)
    assert Transcript.from_bytes(t.to_bytes()).records == t.records


def test_truncated_transcript():
    t = Transcript()
    t.add(1, P2V, [1, 2, 3])
    data = t.to_bytes()
    for cut in range(1, len(data)):
        with pytest.raises(ValueError):
            Transcript.from_bytes(data[:cut])


def test_bad_direction():
    t = Transcript()
    t.add(1, P2V, [1])
    data = bytearray(t.to_bytes())
    data[2] = 7
    with pytest.raises(ValueError):
        Transcript.from_bytes(bytes(data))


def test_replay_length_checks():
    session = Session.create(Query("f2"), [EXAMPLE8_STREAM], seed=1)
    t = session.run().transcript
    short = Transcript(t.records[:-1])
    assert not session.replay(short).accepted
    longer = t.copy()
    longer.add(9, P2V, [0, 0, 0])
    assert not replay(longer, session.verifier()).accepted
    assert session.replay(t).accepted


def test_proof_size_counts():
    t = Session.create(Query("f2"), [EXAMPLE8_STREAM], seed=1).run().transcript
    assert t.element_count(P2V) == 3 * 3
    assert t.proof_bytes() == 72
