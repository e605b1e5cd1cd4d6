import itertools
import random

import pytest
from hypothesis import given, settings, strategies as st

from wbstream.hierarchical_hh import (
    BernHHH,
    DeterministicHHH,
    Hierarchy,
    RobustHHH,
    check_hhh_report,
    deterministic_hhh,
    exact_hhh,
    prefix_frequencies,
)
from wbstream.stream_core import RandomTape, StreamUpdate, resume, serialize_state

BINARY4 = Hierarchy.with_fanout(4, 2)


def freq(stream, n):
    f = [0] * n
    for x in stream:
        f[x - 1] += 1
    return f


def feed(alg, stream, tape=None):
    for x in stream:
        alg.process(StreamUpdate(x), tape)
    return alg


def test_fanout_hierarchy_shape():
    assert BINARY4.height == 2
    assert BINARY4.ancestors(3) == [3, 2, 1]
    assert BINARY4.elements([(1, 1)]) == {1, 2}
    assert BINARY4.is_ancestor((2, 1), (0, 4))
    assert not BINARY4.is_ancestor((1, 1), (0, 3))


def test_hierarchy_lines_round_trip():
    h = Hierarchy.with_fanout(9, 3)
    assert Hierarchy.from_lines(h.to_lines()) == h


def test_hierarchy_rejects_partial_parent_map():
    with pytest.raises(ValueError):
        Hierarchy(3, [{1: 1, 2: 1}])


def test_single_leaf():
    report = deterministic_hhh([3] * 50, BINARY4, 0.2, 0.2)
    assert report == [((0, 3), 50)]


def test_pairs_report_parent_only():
    stream = [1, 2, 1, 2, 3, 4] * 100
    assert exact_hhh(freq(stream, 4), BINARY4, 0.4) == [(1, 1)]
    assert deterministic_hhh(stream, BINARY4, 0.4, 0.4) == [((1, 1), 400)]


def test_uniform_reports_root_only():
    ternary = Hierarchy.with_fanout(9, 3)
    stream = list(range(1, 10)) * 50
    assert exact_hhh(freq(stream, 9), ternary, 0.5) == [(2, 1)]
    assert deterministic_hhh(stream, ternary, 0.5, 0.5) == [((2, 1), 450)]


def test_uniform_binary_halves_sit_on_the_threshold():
    # each half carries exactly m/2: heavy under the inclusive definition,
    # not reported by the sketch's strict residual test
    stream = [1, 2, 3, 4] * 100
    assert exact_hhh(freq(stream, 4), BINARY4, 0.5) == [(1, 1), (1, 2)]
    assert deterministic_hhh(stream, BINARY4, 0.5, 0.5) == [((2, 1), 400)]


@given(st.lists(st.integers(1, 8), max_size=200), st.sampled_from([0.1, 0.2, 0.25, 0.5]))
@settings(max_examples=80, deadline=None)
def test_deterministic_accuracy_and_coverage(stream, eps):
    h = Hierarchy.with_fanout(8, 2)
    report = deterministic_hhh(stream, h, eps, eps)
    f = freq(stream, 8)
    assert check_hhh_report(report, f, h, eps, eps) == []
    exact = prefix_frequencies(f, h)
    assert all(est <= exact[p] for p, est in report)
    assert len(report) <= 2 * (h.height + 1) * (h.height / eps + 1)


def test_exhaustive_short_streams():
    for length in range(7):
        for stream in itertools.product(range(1, 5), repeat=length):
            report = deterministic_hhh(stream, BINARY4, 0.25, 0.25)
            assert check_hhh_report(report, freq(stream, 4), BINARY4, 0.25, 0.25) == []


def test_bernhhh_rate_one_equals_deterministic():
    b = BernHHH(BINARY4, 1.0, 0.4, 0.4, 0.1)
    assert b.p == 1.0
    rng = random.Random(2)
    stream = [rng.randint(1, 4) for _ in range(300)]
    feed(b, stream, RandomTape(0))
    inner = DeterministicHHH(BINARY4, 0.2, 0.4)
    feed(inner, stream)
    assert b.report() == [(p, float(c)) for p, c in inner.report()]


def test_bernhhh_empty():
    assert BernHHH(BINARY4, 1e4, 0.2, 0.2, 0.1).report() == []


def test_robust_before_first_rollover_is_one_bernhhh():
    eps = 0.5
    stream = [1, 1, 2, 3, 1, 4] * 4  # 24 < 16 / eps
    r = feed(RobustHHH(BINARY4, eps), stream, RandomTape(4))
    assert r.c == 1
    single = BernHHH(BINARY4, 16 / eps, eps / 2, eps, r.delta)
    assert single.p == 1.0
    assert r.report() == feed(single, stream).report()


def test_robust_keeps_heavy_prefix_across_rollover():
    h = Hierarchy.with_fanout(8, 2)
    rng = random.Random(9)
    stream = []
    for _ in range(3000):
        stream.append(rng.choice((1, 2)) if rng.random() < 0.6 else rng.randint(3, 8))
    r = feed(RobustHHH(h, 0.5), stream, RandomTape(1))
    assert r.c >= 2
    assert (1, 1) in [p for p, _ in r.report()]


def test_encodings_round_trip():
    rng = random.Random(5)
    stream = [rng.randint(1, 8) for _ in range(400)]
    h = Hierarchy.with_fanout(8, 2)
    for alg in (DeterministicHHH(h, 0.25, 0.25), BernHHH(h, 2000, 0.25, 0.25, 0.1), RobustHHH(h, 0.5)):
        feed(alg, stream, RandomTape(3))
        back = resume(serialize_state(alg))
        assert back.to_bytes() == alg.to_bytes()
        assert back.report() == alg.report()


def test_robust_resume_midstream():
    h = Hierarchy.with_fanout(8, 2)
    rng = random.Random(8)
    stream = [rng.randint(1, 8) for _ in range(1200)]
    straight = feed(RobustHHH(h, 0.5), stream, RandomTape(2))
    tape = RandomTape(2)
    half = feed(RobustHHH(h, 0.5), stream[:600], tape)
    assert feed(resume(serialize_state(half)), stream[600:], tape).to_bytes() == straight.to_bytes()


def test_state_is_sublinear_in_m():
    h = Hierarchy.with_fanout(8, 2)

    def bits(m):
        r, tape = RobustHHH(h, 0.5, m_cap=2 ** 22), RandomTape(0)
        rng = random.Random(0)
        for _ in range(m):
            r.process(StreamUpdate(rng.randint(1, 8)), tape)
        return 8 * len(r.to_bytes())

    small, large = bits(2 ** 10), bits(2 ** 16)
    assert large < 2 * small
