import random

import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from wbstream.crypto_prims import (
    DlFingerprinter,
    RandomOracle,
    RandomOracleMatrix,
    bits_of,
    int_of_bits,
    ro_matrix_column,
    safe_prime,
)

FP = DlFingerprinter()
bitstrings = st.lists(st.integers(0, 1), max_size=32)


def direct(bits):
    return pow(FP.g, int_of_bits(bits), FP.p)


def test_test_mode_group():
    p, g = safe_prime(64)
    assert (FP.p, FP.g) == (p, g)
    assert FP.order in ((p - 1) // 2, p - 1)


def test_append_examples():
    assert FP.append_bit(FP.empty, 1) == FP.g
    assert FP.fingerprint([1, 0]) == pow(FP.g, 2, FP.p)


def test_random_64_bit_strings_match_direct_power():
    rng = random.Random(1)
    for _ in range(50):
        bits = [rng.randint(0, 1) for _ in range(64)]
        assert FP.fingerprint(bits) == FP.of_int(int_of_bits(bits))


def test_concat_examples():
    h = FP.fingerprint([1, 0, 1])
    assert FP.concat(h, FP.empty, 0) == h
    one = FP.fingerprint([1])
    assert FP.concat(one, one, 1) == pow(FP.g, 3, FP.p) == FP.fingerprint([1, 1])


@given(bitstrings, bitstrings)
def test_concat_matches_direct(u, v):
    assert FP.concat(FP.fingerprint(u), FP.fingerprint(v), len(v)) == direct(u + v)


def test_drop_prefix_examples():
    h = FP.fingerprint([1, 0])
    assert h == pow(FP.g, 2, FP.p)
    assert FP.drop_prefix(h, 1, 2) == 1 == FP.fingerprint([0])
    assert FP.drop_prefix(FP.fingerprint([1]), 1, 1) == FP.empty
    with pytest.raises(ValueError):
        FP.drop_prefix(1, 0, 0)


@given(st.lists(st.integers(0, 1), min_size=1, max_size=32))
def test_drop_prefix_matches_direct(u):
    assert FP.drop_prefix(FP.fingerprint(u), u[0], len(u)) == direct(u[1:])


@given(st.integers(0, 255), st.lists(st.integers(0, 1), max_size=24))
def test_block_ops_match_bitwise(value, tail):
    block = bits_of(value, 8)
    h = FP.append_bits(FP.empty, value, 8)
    assert h == FP.fingerprint(block)
    whole = FP.fingerprint(block + tail)
    assert FP.drop_block(whole, value, 8, 8 + len(tail)) == direct(tail)


def test_injective_on_all_20_bit_values():
    seen, h = set(), 1
    for _ in range(1 << 20):
        seen.add(h)
        h = h * FP.g % FP.p
    assert len(seen) == 1 << 20


def test_custom_group_order():
    fp = DlFingerprinter.custom(23, 5)
    assert fp.order == 22
    assert fp.fingerprint([1, 1]) == pow(5, 3, 23)
    with pytest.raises(ValueError):
        DlFingerprinter("custom")


def test_random_oracle_columns_consistent():
    a, b = RandomOracleMatrix(7, 5, 10, 1009), RandomOracleMatrix(7, 5, 10, 1009)
    assert a.column(3) == b.column(3) == ro_matrix_column(a, 3)
    assert a.column(3) == [a.entry(i, 3) for i in range(1, 6)]


def test_random_oracle_columns_differ():
    same = sum(RandomOracleMatrix(s, 4, 2, 2 ** 61 - 1).column(1) == RandomOracleMatrix(s, 4, 2, 2 ** 61 - 1).column(2)
               for s in range(100))
    assert same == 0


def test_degenerate_modulus():
    assert RandomOracleMatrix(1, 6, 3, 1).column(2) == [0] * 6


def test_index_checks():
    m = RandomOracleMatrix(1, 2, 2, 5)
    with pytest.raises(IndexError):
        m.column(3)
    with pytest.raises(ValueError):
        RandomOracle(-1)


def test_oracle_uniformity_chi_square():
    q, samples = 101, 10 ** 5
    oracle = RandomOracle(2024)
    counts = [0] * q
    for j in range(samples):
        counts[oracle.value(q, 1, j)] += 1
    assert chisquare(counts).pvalue > 0.01


def test_large_modulus_values_in_range():
    q = (1 << 300) + 7
    oracle = RandomOracle(3)
    assert all(0 <= oracle.value(q, i) < q for i in range(20))
