"""Discrete-log fingerprints h(U) = g^U mod p and a SHA-256 random oracle."""
from __future__ import annotations

import hashlib
from functools import lru_cache
from typing import Iterable, Sequence

import sympy

# 64-bit safe prime: p = 2q + 1 with q prime; 2 generates all of Z_p^*.
TEST_PRIME = 0xFFFFFFFFFFFFFA43
TEST_GENERATOR = 2

# 2048-bit MODP group (RFC 3526 group 14); 2 generates the order-q subgroup.
SECURE_PRIME = int(
    "ffffffffffffffffc90fdaa22168c234c4c6628b80dc1cd129024e088a67cc74"
    "020bbea63b139b22514a08798e3404ddef9519b3cd3a431b302b0a6df25f1437"
    "4fe1356d6d51c245e485b576625e7ec6f44c42e9a637ed6b0bff5cb6f406b7ed"
    "ee386bfb5a899fa5ae9f24117c4b1fe649286651ece45b3dc2007cb8a163bf05"
    "98da48361c55d39a69163fa8fd24cf5f83655d23dca3ad961c62f356208552bb"
    "9ed529077096966d670c354e4abc9804f1746c08ca18217c32905e462e36ce3b"
    "e39e772c180e86039b2783a2ec07a28fb5c55df06f4c52c9de2bcbf695581718"
    "3995497cea956ae515d2261898fa051015728e5a8aacaa68ffffffffffffffff",
    16,
)
SECURE_GENERATOR = 2

# cost charged to an instrumented adversary for one modular multiplication
MUL_COST = 1


def multiplicative_order_safe(g: int, p: int) -> int:
    """Order of g modulo a safe prime p = 2q + 1."""
    q = (p - 1) // 2
    g %= p
    if g == 0:
        raise ValueError("0 has no multiplicative order")
    if g == 1:
        return 1
    if g == p - 1:
        return 2
    return q if pow(g, q, p) == 1 else p - 1


@lru_cache(maxsize=None)
def safe_prime(bits: int) -> tuple[int, int]:
    """Largest safe prime below 2^bits and the least generator of Z_p^*."""
    if bits < 3:
        raise ValueError("need at least 3 bits")
    if bits == 64:
        return TEST_PRIME, TEST_GENERATOR
    q = sympy.prevprime(1 << (bits - 1))
    while not sympy.isprime(2 * q + 1):
        q = sympy.prevprime(q)
    p = 2 * q + 1
    g = 2
    while multiplicative_order_safe(g, p) != p - 1:
        g += 1
    return p, g


class DlFingerprinter:
    """h(U) = g^U mod p, U read as a big-endian bit string.

    All of the incremental operations work on the group element alone plus
    lengths the caller tracks. Exponents live modulo the order of g, so two
    strings whose integer values agree modulo that order collide; in test
    mode inputs shorter than log2(order) bits never wrap.
    """

    def __init__(self, mode: str = "test", prime_bits: int = 64, p: int | None = None, g: int | None = None):
        if mode == "custom" and (p is None or g is None):
            raise ValueError("custom mode needs explicit p and g")
        if p is None:
            if mode == "secure":
                p, g = SECURE_PRIME, SECURE_GENERATOR
            elif mode == "test":
                p, g = safe_prime(prime_bits)
            else:
                raise ValueError(f"unknown mode {mode!r}")
        elif mode != "custom":
            raise ValueError("explicit p and g require mode='custom'")
        self.mode = mode
        self.p = p
        self.g = g % p
        if mode == "custom":
            self.order = int(sympy.n_order(self.g, p))
        else:
            self.order = multiplicative_order_safe(self.g, p)
        self.g_inv = pow(self.g, -1, p)
        self.bits = p.bit_length()

    @classmethod
    def custom(cls, p: int, g: int) -> "DlFingerprinter":
        """Any prime p and unit g; the order is computed by sympy."""
        return cls(mode="custom", p=p, g=g)

    @property
    def empty(self) -> int:
        return 1

    def of_int(self, u: int) -> int:
        return pow(self.g, u % self.order, self.p)

    def fingerprint(self, bits: Iterable[int]) -> int:
        h = 1
        for b in bits:
            h = self.append_bit(h, b)
        return h

    def append_bit(self, h: int, bit: int) -> int:
        h = h * h % self.p
        return h * self.g % self.p if bit else h

    def append_bits(self, h: int, value: int, width: int) -> int:
        """Append a width-bit block (big-endian) in one step: h^(2^w) * g^value."""
        return pow(h, 1 << width, self.p) * pow(self.g, value, self.p) % self.p

    def concat(self, h_u: int, h_v: int, len_v: int) -> int:
        if len_v < 0:
            raise ValueError("len_v must be nonnegative")
        shift = pow(2, len_v, self.order)
        return pow(h_u, shift, self.p) * h_v % self.p

    def drop_prefix(self, h_u: int, leading_bit: int, len_u: int) -> int:
        if len_u < 1:
            raise ValueError("cannot drop from an empty string")
        if not leading_bit:
            return h_u
        e = pow(2, len_u - 1, self.order)
        return h_u * pow(self.g_inv, e, self.p) % self.p

    def drop_block(self, h_u: int, value: int, width: int, len_u: int) -> int:
        """Remove a leading width-bit block of the given value from a len_u-bit string."""
        if not value:
            return h_u
        e = value * pow(2, len_u - width, self.order) % self.order
        return h_u * pow(self.g_inv, e, self.p) % self.p

    def power_cost(self, exponent_bits: int | None = None) -> int:
        """Instrumented cost of one exponentiation (square-and-multiply)."""
        return 2 * (exponent_bits or self.bits) * MUL_COST


def bits_of(value: int, width: int) -> list[int]:
    return [(value >> (width - 1 - i)) & 1 for i in range(width)]


def int_of_bits(bits: Sequence[int]) -> int:
    x = 0
    for b in bits:
        x = (x << 1) | b
    return x


class RandomOracle:
    """oracle(seed, i, j) uniform in [0, q) via SHA-256 with rejection sampling."""

    def __init__(self, seed: int):
        if not 0 <= seed < 1 << 256:
            raise ValueError("oracle seed must be a nonnegative 256-bit integer")
        self.seed = seed
        self._prefix = seed.to_bytes(32, "little")

    def value(self, q: int, *index: int) -> int:
        if q < 1:
            raise ValueError("modulus must be positive")
        if q == 1:
            return 0
        nbits = (q - 1).bit_length()
        nblocks = -(-nbits // 256)
        key = self._prefix + b"".join(k.to_bytes(8, "little") for k in index)
        counter = 0
        while True:
            acc = 0
            for _ in range(nblocks):
                acc = (acc << 256) | int.from_bytes(
                    hashlib.sha256(key + counter.to_bytes(4, "little")).digest(), "big")
                counter += 1
            x = acc >> (256 * nblocks - nbits)
            if x < q:
                return x


class RandomOracleMatrix:
    """rows x cols matrix over Z_q whose entries come from the random oracle.

    Entries are 1-indexed and produced on demand.
    """

    def __init__(self, seed: int, rows: int, cols: int, q: int):
        if rows < 1 or cols < 1:
            raise ValueError("matrix dimensions must be positive")
        self.seed, self.rows, self.cols, self.q = seed, rows, cols, q
        self.oracle = RandomOracle(seed)
        self._columns: dict[int, list[int]] = {}  # oracle outputs are fixed, so memoizing is safe

    def entry(self, i: int, j: int) -> int:
        if not (1 <= i <= self.rows and 1 <= j <= self.cols):
            raise IndexError(f"entry ({i}, {j}) outside {self.rows}x{self.cols}")
        return self.oracle.value(self.q, i, j)

    def column(self, j: int) -> list[int]:
        if not 1 <= j <= self.cols:
            raise IndexError(f"column {j} outside [1, {self.cols}]")
        col = self._columns.get(j)
        if col is None:
            col = self._columns[j] = [self.oracle.value(self.q, i, j) for i in range(1, self.rows + 1)]
        return col

    def materialize(self) -> list[list[int]]:
        return [[self.entry(i, j) for j in range(1, self.cols + 1)] for i in range(1, self.rows + 1)]


def ro_matrix_column(matrix: RandomOracleMatrix, j: int) -> list[int]:
    return matrix.column(j)
