"""Streaming string equality and pattern matching with a known period.

Characters are fixed-width bit blocks (1 bit for binary text, 8 for bytes)
fed to the DL fingerprinter.
"""
from __future__ import annotations

from collections import deque
from typing import NamedTuple, Sequence

from .crypto_prims import DlFingerprinter
from .stream_core import Decoder, Encoder, RandomTape, StreamAlgorithm, StreamError, register


class SymbolUpdate(NamedTuple):
    """Append `symbol` to string number `track` (0 is U, 1 is V)."""

    track: int
    symbol: int


class EqualityResult(NamedTuple):
    equal: bool
    reason: str


class StringPairOracle:
    """Exact copies of both strings, for ground truth in games."""

    def __init__(self, alphabet: int = 2):
        self.alphabet = alphabet
        self.strings: tuple[list[int], list[int]] = ([], [])

    def ingest(self, update) -> None:
        track, symbol = update
        if track not in (0, 1):
            raise StreamError(f"track must be 0 or 1, got {track}")
        if not 0 <= symbol < self.alphabet:
            raise StreamError(f"symbol {symbol} outside alphabet of size {self.alphabet}")
        self.strings[track].append(symbol)

    def lengths_equal(self) -> bool:
        return len(self.strings[0]) == len(self.strings[1])

    def equal(self) -> bool:
        return self.strings[0] == self.strings[1]


@register
class StreamEqualityTester(StreamAlgorithm):
    """Two incremental DL fingerprints; answers whether U = V."""

    algorithm_id = "crhf_equality"

    def __init__(self, fingerprinter: DlFingerprinter | None = None):
        self.fp = fingerprinter or DlFingerprinter()
        self.h = [1, 1]
        self.length = [0, 0]

    def process(self, update, tape: RandomTape | None = None) -> None:
        track, bit = update
        self.h[track] = self.fp.append_bit(self.h[track], bit)
        self.length[track] += 1

    def result(self) -> EqualityResult:
        if self.length[0] != self.length[1]:
            return EqualityResult(False, f"length mismatch: {self.length[0]} != {self.length[1]}")
        if self.h[0] == self.h[1]:
            return EqualityResult(True, "fingerprints match")
        return EqualityResult(False, "fingerprints differ")

    def answer(self) -> bool:
        return self.result().equal

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.fp.p).uint(self.fp.g)
        for k in (0, 1):
            enc.uint(self.h[k]).uint(self.length[k])

    @classmethod
    def decode(cls, dec: Decoder) -> "StreamEqualityTester":
        p, g = dec.uint(), dec.uint()
        self = cls(_fingerprinter_for(p, g))
        for k in (0, 1):
            self.h[k], self.length[k] = dec.uint(), dec.uint()
        return self

    def clone(self) -> "StreamEqualityTester":
        other = StreamEqualityTester(self.fp)
        other.h, other.length = self.h[:], self.length[:]
        return other


_FP_CACHE: dict[tuple[int, int], DlFingerprinter] = {}


def _fingerprinter_for(p: int, g: int) -> DlFingerprinter:
    key = (p, g)
    if key not in _FP_CACHE:
        default = DlFingerprinter()
        _FP_CACHE[key] = default if (default.p, default.g) == key else DlFingerprinter.custom(p, g)
    return _FP_CACHE[key]


def stream_equal(u: Sequence[int], v: Sequence[int], fingerprinter: DlFingerprinter | None = None) -> EqualityResult:
    """Feed U then V bit by bit and compare fingerprints."""
    tester = StreamEqualityTester(fingerprinter)
    for b in u:
        tester.process(SymbolUpdate(0, b))
    for b in v:
        tester.process(SymbolUpdate(1, b))
    return tester.result()


# ---------------------------------------------------------------- matching


def minimal_period(s: Sequence) -> int:
    """Smallest p >= 1 with s[i] = s[i + p] for all valid i (prefix function)."""
    n = len(s)
    if n == 0:
        return 0
    fail = [0] * n
    k = 0
    for i in range(1, n):
        while k and s[i] != s[k]:
            k = fail[k - 1]
        if s[i] == s[k]:
            k += 1
        fail[i] = k
    return n - fail[-1]


def is_period(s: Sequence, p: int) -> bool:
    return 1 <= p <= len(s) and all(s[i] == s[i + p] for i in range(len(s) - p))


def naive_matches(pattern: Sequence, text: Sequence) -> list[int]:
    n = len(pattern)
    pattern = list(pattern)
    return [i for i in range(len(text) - n + 1) if list(text[i:i + n]) == pattern]


class _Window:
    """Fingerprint of the last `size` characters, with precomputed block drops."""

    __slots__ = ("size", "h", "drop")

    def __init__(self, fp: DlFingerprinter, size: int, width: int, alphabet: int):
        self.size = size
        self.h = 1
        # multiplying by drop[v] removes a leading block v from a (size+1)-block string
        base = pow(fp.g_inv, pow(2, size * width, fp.order), fp.p)
        self.drop = [pow(base, v, fp.p) for v in range(alphabet)]


@register
class PatternMatcher(StreamAlgorithm):
    """Reports every occurrence of P in a text stream, given P's period p.

    Candidates are anchored at occurrences of P[1:p]. A run of occurrences
    spaced exactly p apart forms a chain; true matches inside a chain form
    a prefix of it, so a failed verification discards the chain.
    """

    algorithm_id = "pattern_match"

    def __init__(self, pattern: Sequence[int], period: int, width: int = 8,
                 fingerprinter: DlFingerprinter | None = None, *, _psi=None, _phi=None, _n=None):
        self.fp = fingerprinter or DlFingerprinter()
        self.width = width
        self.alphabet = 1 << width
        if _psi is None:
            pattern = list(pattern)
            if not pattern:
                raise ValueError("pattern must be nonempty")
            if any(not 0 <= c < self.alphabet for c in pattern):
                raise ValueError(f"pattern symbols must fit in {width} bits")
            if not is_period(pattern, period):
                raise ValueError(f"{period} is not a period of the pattern")
            if minimal_period(pattern) != period:
                raise ValueError(f"{period} is a period but not the minimal one "
                                 f"({minimal_period(pattern)})")
            _psi = self._fingerprint(pattern[:period])
            _phi = self._fingerprint(pattern)
            _n = len(pattern)
        self.psi, self.phi, self.p, self.n_pattern = _psi, _phi, period, _n
        self._g_pow = [pow(self.fp.g, v, self.fp.p) for v in range(self.alphabet)]
        self.short = _Window(self.fp, self.p, width, self.alphabet)
        self.long = _Window(self.fp, self.n_pattern, width, self.alphabet)
        self.queue: deque[int] = deque()
        self.j = 0  # characters read
        self.m: int | None = None  # current candidate start (0-based)
        self.last: int | None = None  # last start in the current chain
        self.output: int | None = None  # match confirmed at this step, if any

    def _fingerprint(self, chars) -> int:
        h = 1
        for c in chars:
            h = self.fp.append_bits(h, c, self.width)
        return h

    def _push(self, win: _Window, c: int, leaving: int | None) -> None:
        p = self.fp.p
        h = pow(win.h, 1 << self.width, p) * self._g_pow[c] % p
        if leaving is not None:
            h = h * win.drop[leaving] % p
        win.h = h

    def process(self, c, tape: RandomTape | None = None) -> None:
        if not 0 <= c < self.alphabet:
            raise ValueError(f"symbol {c} does not fit in {self.width} bits")
        q = self.queue
        q.append(c)
        self.j += 1
        j, p, n = self.j, self.p, self.n_pattern
        self._push(self.short, c, q[-1 - p] if len(q) > p else None)
        self._push(self.long, c, q[0] if len(q) > n else None)
        if len(q) > n:
            q.popleft()
        self.output = None

        if j >= p and self.short.h == self.psi:
            i = j - p  # 0-based start of the P[1:p] occurrence
            if self.m is None or (i - self.m) % p:
                self.m = self.last = i
            elif i == self.last + p:
                self.last = i
            else:
                self.m = self.last = i

        if self.m is not None and j == self.m + n:
            if self.long.h == self.phi:
                self.output = self.m
                self.m += p
                if self.m > self.last:
                    self.m = self.last = None
            else:
                self.m = self.last = None

    def answer(self) -> int | None:
        return self.output

    def window_fingerprints(self) -> tuple[int, int]:
        return self.short.h, self.long.h

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.fp.p).uint(self.fp.g).uint(self.width)
        enc.uint(self.psi).uint(self.phi).uint(self.p).uint(self.n_pattern)
        enc.uint(self.j).uint(self.short.h).uint(self.long.h)
        for v in (self.m, self.last, self.output):
            enc.uint(0 if v is None else v + 1)
        enc.uint(len(self.queue))
        for c in self.queue:
            enc.uint(c)

    @classmethod
    def decode(cls, dec: Decoder) -> "PatternMatcher":
        fp = _fingerprinter_for(dec.uint(), dec.uint())
        width = dec.uint()
        psi, phi, p, n = dec.uint(), dec.uint(), dec.uint(), dec.uint()
        self = cls((), p, width, fp, _psi=psi, _phi=phi, _n=n)
        self.j, self.short.h, self.long.h = dec.uint(), dec.uint(), dec.uint()
        self.m, self.last, self.output = [None if v == 0 else v - 1 for v in (dec.uint(), dec.uint(), dec.uint())]
        self.queue = deque(dec.uint() for _ in range(dec.uint()))
        return self

    def fingerprint_state_bits(self) -> int:
        """Bits of fingerprint state only (the window queue excluded)."""
        return 4 * self.fp.bits


def pattern_match(pattern: Sequence[int], period: int, text, width: int = 8,
                  fingerprinter: DlFingerprinter | None = None) -> list[int]:
    """0-based positions i with text[i:i+len(pattern)] == pattern."""
    matcher = PatternMatcher(pattern, period, width, fingerprinter)
    out = []
    for c in text:
        matcher.process(c)
        if matcher.output is not None:
            out.append(matcher.output)
    return out


def to_symbols(data: bytes | str, alphabet: str = "bytes") -> tuple[list[int], int]:
    """Turn raw text into symbols and a block width."""
    if isinstance(data, str):
        if alphabet == "binary":
            data = data.strip()
            if set(data) - {"0", "1"}:
                raise ValueError("binary text may contain only 0 and 1")
            return [int(ch) for ch in data], 1
        data = data.encode("utf-8")
    if alphabet == "binary":
        return to_symbols(data.decode("ascii"), "binary")
    return list(data), 8
