"""Non-robust sketches the attacks break, plus query contracts."""
from __future__ import annotations

import numpy as np
import sympy

from ..pattern_matching import StringPairOracle
from ..stream_core import Decoder, Encoder, FrequencyOracle, RandomTape, StreamAlgorithm, UniverseParams, register
from .harness import QueryContract

KR_PRIME_RANGE = (1 << 11, 1 << 12)


@register
class KarpRabinTester(StreamAlgorithm):
    """Equality of two bit strings via sum_j U[j] x^j mod p (j from 1).

    The prime p and the base x are drawn from the tape at initialization.
    """

    algorithm_id = "karp_rabin"

    def __init__(self, p: int | None = None, x: int | None = None):
        self.p, self.x = p, x
        self.fp = [0, 0]
        self.length = [0, 0]
        self.power = [1, 1]  # x^length per track

    def initialize(self, tape: RandomTape) -> None:
        lo, hi = KR_PRIME_RANGE
        while self.p is None:
            cand = lo + tape.below(hi - lo + 1)
            if sympy.isprime(cand):
                self.p = cand
        if self.x is None:
            self.x = 2 + tape.below(self.p - 2)

    def process(self, update, tape: RandomTape | None = None) -> None:
        track, bit = update
        self.power[track] = self.power[track] * self.x % self.p
        if bit:
            self.fp[track] = (self.fp[track] + self.power[track]) % self.p
        self.length[track] += 1

    def answer(self) -> bool:
        return self.length[0] == self.length[1] and self.fp[0] == self.fp[1]

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.p or 0).uint(self.x or 0)
        for k in (0, 1):
            enc.uint(self.fp[k]).uint(self.length[k]).uint(self.power[k])

    @classmethod
    def decode(cls, dec: Decoder) -> "KarpRabinTester":
        p, x = dec.uint(), dec.uint()
        self = cls(p or None, x or None)
        for k in (0, 1):
            self.fp[k], self.length[k], self.power[k] = dec.uint(), dec.uint(), dec.uint()
        return self

    def clone(self) -> "KarpRabinTester":
        other = KarpRabinTester(self.p, self.x)
        other.fp, other.length, other.power = self.fp[:], self.length[:], self.power[:]
        return other


def karp_rabin_fingerprint(bits, p: int, x: int) -> int:
    return sum(pow(x, j, p) for j, b in enumerate(bits, 1) if b) % p


@register
class AmsSketch(StreamAlgorithm):
    """F2 estimate: mean over r rows of <Z_k, f>^2 with random signs Z."""

    algorithm_id = "ams"

    def __init__(self, n: int, r: int):
        self.n, self.r = n, r
        self.Z: np.ndarray | None = None  # r x n, entries +-1
        self.y = np.zeros(r, dtype=np.int64)

    def initialize(self, tape: RandomTape) -> None:
        nbits = self.r * self.n
        words = np.array(tape.words(-(-nbits // 64)), dtype=np.uint64)
        bits = np.unpackbits(words.view(np.uint8), bitorder="little")[:nbits]
        self.Z = (1 - 2 * bits.astype(np.int64)).reshape(self.r, self.n)

    def process(self, update, tape: RandomTape | None = None) -> None:
        c, d = update
        self.y += d * self.Z[:, c - 1]

    def answer(self) -> float:
        return float(np.dot(self.y, self.y)) / self.r

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.n).uint(self.r)
        enc.boolean(self.Z is not None)
        if self.Z is not None:
            enc.raw(np.packbits(self.Z.ravel() < 0, bitorder="little").tobytes())
        for v in self.y.tolist():
            enc.sint(v)

    @classmethod
    def decode(cls, dec: Decoder) -> "AmsSketch":
        self = cls(dec.uint(), dec.uint())
        if dec.boolean():
            packed = np.frombuffer(dec.raw(), dtype=np.uint8)
            bits = np.unpackbits(packed, bitorder="little")[: self.r * self.n]
            self.Z = (1 - 2 * bits.astype(np.int64)).reshape(self.r, self.n)
        self.y = np.array([dec.sint() for _ in range(self.r)], dtype=np.int64)
        return self

    def clone(self) -> "AmsSketch":
        other = AmsSketch(self.n, self.r)
        other.Z = self.Z  # never mutated after initialize
        other.y = self.y.copy()
        return other


# ---------------------------------------------------------------- contracts


def equality_contract() -> QueryContract:
    """Answer must equal (U == V) whenever both strings have the same length."""
    return QueryContract(
        "string-equality",
        truth=lambda o: o.equal() if o.lengths_equal() else None,
        check=lambda truth, ans: truth is None or ans == truth,
        oracle_factory=StringPairOracle,
    )


def f2_contract(params: UniverseParams, tolerance: float = 0.5) -> QueryContract:
    def truth(o: FrequencyOracle):
        return sum(v * v for v in o.f)
    return QueryContract(
        "f2",
        truth=truth,
        check=lambda f2, est: abs(est - f2) <= tolerance * f2,
        oracle_factory=lambda: FrequencyOracle(params),
    )


def count_contract(eps: float, schedule: str = "final") -> QueryContract:
    """(1 +- eps)-approximation of the number of updates so far."""
    return QueryContract(
        "count",
        truth=lambda o: o.m,
        check=lambda m, est: abs(est - m) <= eps * m,
        schedule=schedule,
    )


def heavy_item_contract(item: int, schedule: str = "final") -> QueryContract:
    """The given item must appear in the heavy hitter report.

    For hierarchical reports pass the prefix, e.g. (0, leaf).
    """
    leaf = item if isinstance(item, int) else item[1]

    def check(_truth, report):
        items = report.items if hasattr(report, "items") and not isinstance(report, list) else report
        return any(i == item for i, _ in items)
    return QueryContract("heavy-item", truth=lambda o: o.f[leaf], check=check, schedule=schedule)
