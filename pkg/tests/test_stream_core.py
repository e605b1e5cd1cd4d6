import random

import pytest
from hypothesis import given, settings, strategies as st

from wbstream.approx_counting import MorrisCounter
from wbstream.heavy_hitters import MisraGries
from wbstream.stream_core import (
    CoordinateRangeError,
    Decoder,
    Encoder,
    MagnitudeError,
    RandomTape,
    StreamError,
    StreamKind,
    StreamUpdate,
    UniverseParams,
    exact_frequency_oracle,
    parse_stream_lines,
    read_stream_file,
    resume,
    serialize_state,
    state_size_bits,
    write_stream_file,
)

TURNSTILE = StreamKind.TURNSTILE


def test_oracle_examples():
    p = UniverseParams(4)
    assert exact_frequency_oracle([], p) == [0, 0, 0, 0]
    assert exact_frequency_oracle([StreamUpdate(c) for c in (1, 1, 3)], p) == [2, 0, 1, 0]
    t = UniverseParams(4, TURNSTILE)
    assert exact_frequency_oracle([(2, 5), (2, -3)], t) == [0, 2, 0, 0]


def test_oracle_rejects_bad_updates():
    with pytest.raises(CoordinateRangeError):
        exact_frequency_oracle([StreamUpdate(5)], UniverseParams(4))
    with pytest.raises(StreamError):
        exact_frequency_oracle([StreamUpdate(1, -1)], UniverseParams(4))
    with pytest.raises(MagnitudeError):
        exact_frequency_oracle([StreamUpdate(1, 9)], UniverseParams(2, TURNSTILE, max_magnitude=8))


def test_resume_matches_unserialized_run():
    mg = MisraGries(2)
    resumed = resume(serialize_state(mg))
    for alg in (mg, resumed):
        alg.update(1)
        alg.update(1)
    assert resumed.report() == mg.report() == [(1, 2)]


def test_equal_states_have_equal_bytes():
    a, b = MisraGries(3), MisraGries(3)
    for x in (5, 2, 5, 7):
        a.update(x)
    for x in (2, 5, 5, 7):
        b.update(x)
    assert serialize_state(a).state_bytes == serialize_state(b).state_bytes


def test_resume_midstream_with_same_tape():
    rng = random.Random(11)
    stream = [StreamUpdate(rng.randint(1, 40)) for _ in range(200)]
    straight, tape = MorrisCounter(0.5, 5), RandomTape(99)
    for u in stream:
        straight.process(u, tape)

    first, tape2 = MorrisCounter(0.5, 5), RandomTape(99)
    for u in stream[:100]:
        first.process(u, tape2)
    second = resume(serialize_state(first))
    for u in stream[100:]:
        second.process(u, tape2)
    assert second.to_bytes() == straight.to_bytes()


def test_state_size_bits_counts_bytes():
    assert state_size_bits(bytes(16)) == 128
    assert state_size_bits(serialize_state(MisraGries(1))) == 8 * len(MisraGries(1).to_bytes())


def test_morris_state_grows_very_slowly():
    # one long tape drives both lengths; only the level values change size
    def bits_after(m):
        c = MorrisCounter(1.0, 9)
        c.add(m, RandomTape(3))
        return state_size_bits(c.to_bytes())

    assert bits_after(10 ** 6) - bits_after(10 ** 3) <= 8


def test_tape_replay_and_advance():
    a = RandomTape(5)
    words = a.words(40)
    b = RandomTape(5, position=17)
    assert b.words(23) == words[17:]
    c = RandomTape(5)
    c.start_round(1)
    c.words(3)
    assert c.end_round() == tuple(words[:3])
    assert c.draws_log == [(1, 192)]


@given(st.integers(2, 10 ** 30), st.integers(0, 2 ** 32))
@settings(max_examples=50, deadline=None)
def test_tape_below_in_range(n, seed):
    assert 0 <= RandomTape(seed).below(n) < n


@given(st.lists(st.one_of(st.integers(-2 ** 70, 2 ** 70), st.text(max_size=5), st.booleans()), max_size=20))
def test_encoder_round_trip(values):
    enc = Encoder()
    for v in values:
        if isinstance(v, bool):
            enc.boolean(v)
        elif isinstance(v, int):
            enc.sint(v)
        else:
            enc.text(v)
    dec = Decoder(enc.getvalue())
    out = []
    for v in values:
        if isinstance(v, bool):
            out.append(dec.boolean())
        elif isinstance(v, int):
            out.append(dec.sint())
        else:
            out.append(dec.text())
    assert out == values
    assert dec.done()


def test_trailing_bytes_rejected():
    data = MisraGries(2).to_bytes() + b"\x00"
    with pytest.raises(ValueError):
        MisraGries.from_bytes(data)


def test_stream_file_round_trip(tmp_path):
    updates = [StreamUpdate(3, 1), StreamUpdate(1, -2)]
    path = tmp_path / "s.txt"
    write_stream_file(path, updates)
    assert read_stream_file(path) == updates
    assert parse_stream_lines(["# header", "4", "2 -1  # note", ""]) == [(4, 1), (2, -1)]
    with pytest.raises(StreamError):
        parse_stream_lines(["1 2 3"])
