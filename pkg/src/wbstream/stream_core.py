"""Stream model, randomness tape, canonical state encoding and the exact oracle."""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from typing import Callable, Iterable, NamedTuple, Sequence

import numpy as np

WORD_BITS = 64
DEFAULT_M_CAP = 2 ** 20


class StreamError(ValueError):
    pass


class CoordinateRangeError(StreamError):
    pass


class MagnitudeError(StreamError):
    pass


class StreamKind(enum.Enum):
    INSERTION_ONLY = "insertion_only"
    TURNSTILE = "turnstile"


class StreamUpdate(NamedTuple):
    coordinate: int
    delta: int = 1


@dataclass(frozen=True)
class UniverseParams:
    n: int
    stream_kind: StreamKind = StreamKind.INSERTION_ONLY
    max_magnitude: int | None = None

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("universe size must be positive")
        if self.max_magnitude is None:
            object.__setattr__(self, "max_magnitude", self.n ** 3)
        if self.max_magnitude < 1:
            raise ValueError("max_magnitude must be positive")

    @property
    def turnstile(self) -> bool:
        return self.stream_kind is StreamKind.TURNSTILE

    def check(self, update: StreamUpdate) -> None:
        c, d = update
        if not 1 <= c <= self.n:
            raise CoordinateRangeError(f"coordinate {c} outside [1, {self.n}]")
        if not self.turnstile and d != 1:
            raise StreamError(f"insertion-only stream got delta {d}")


class FrequencyOracle:
    """Incremental exact frequency vector; the ground truth for every test."""

    def __init__(self, params: UniverseParams):
        self.params = params
        self.f = [0] * (params.n + 1)  # index 0 unused
        self.m = 0  # number of updates ingested

    def ingest(self, update: StreamUpdate) -> None:
        self.params.check(update)
        c, d = update
        v = self.f[c] + d
        if abs(v) > self.params.max_magnitude:
            raise MagnitudeError(f"|f_{c}| would reach {abs(v)} > {self.params.max_magnitude}")
        self.f[c] = v
        self.m += 1

    def vector(self) -> list[int]:
        return self.f[1:]

    def l1(self) -> int:
        return sum(abs(x) for x in self.f)

    def l0(self) -> int:
        return sum(1 for x in self.f if x)


def exact_frequency_oracle(updates: Iterable[StreamUpdate], params: UniverseParams) -> list[int]:
    oracle = FrequencyOracle(params)
    for u in updates:
        oracle.ingest(StreamUpdate(*u))
    return oracle.vector()


# ---------------------------------------------------------------- randomness


class RandomTape:
    """A replayable stream of 64-bit words.

    Words are read in order; `start_round`/`end_round` bracket the words a
    single round consumed, which is what the game exposes as R_t.
    """

    CHUNK = 1 << 14

    def __init__(self, seed: int, position: int = 0):
        self.seed = seed & ((1 << 64) - 1)
        self.draws_log: list[tuple[int, int]] = []
        self._bitgen = np.random.PCG64(self.seed)
        if position:
            self._bitgen.advance(position)
        self._base = position  # absolute position of _buf[0]
        self._buf: list[int] = []
        self._i = 0
        self._mark = 0
        self._round = None

    @property
    def position(self) -> int:
        return self._base + self._i

    def _refill(self) -> None:
        # keep unconsumed words, plus the current round's words for end_round
        start = self._mark if self._round is not None else self._i
        self._base += start
        self._i -= start
        self._mark = 0
        self._buf = self._buf[start:] + self._bitgen.random_raw(self.CHUNK).tolist()

    def word(self) -> int:
        if self._i >= len(self._buf):
            self._refill()
        w = self._buf[self._i]
        self._i += 1
        return w

    def words(self, k: int) -> list[int]:
        if self._i + k > len(self._buf):
            self._refill()
            while self._i + k > len(self._buf):
                self._buf.extend(self._bitgen.random_raw(self.CHUNK).tolist())
        out = self._buf[self._i:self._i + k]
        self._i += k
        return out

    def below(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection on whole words."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n == 1:
            return 0
        bits = (n - 1).bit_length()
        nwords = -(-bits // WORD_BITS)
        while True:
            x = 0
            for _ in range(nwords):
                x = (x << WORD_BITS) | self.word()
            x >>= nwords * WORD_BITS - bits
            if x < n:
                return x

    def start_round(self, t: int) -> None:
        self._round = t
        self._mark = self._i

    def end_round(self) -> tuple[int, ...]:
        words = tuple(self._buf[self._mark:self._i])
        self.draws_log.append((self._round, WORD_BITS * len(words)))
        self._round = None
        self._mark = self._i
        return words


def probability_threshold(p: float) -> int:
    """Word threshold so that P(word < threshold) = p up to 2^-64."""
    if p >= 1.0:
        return 1 << 64
    if p <= 0.0:
        return 0
    return int(p * 2.0 ** 64)


# ---------------------------------------------------------------- encoding


class Encoder:
    """Canonical encoder: LEB128 varints, zigzag for signed, fields in call order."""

    def __init__(self):
        self._parts: list[bytes] = []

    def uint(self, x: int) -> "Encoder":
        if x < 0:
            raise ValueError("uint must be nonnegative")
        out = bytearray()
        while True:
            b = x & 0x7F
            x >>= 7
            if x:
                out.append(b | 0x80)
            else:
                out.append(b)
                break
        self._parts.append(bytes(out))
        return self

    def sint(self, x: int) -> "Encoder":
        return self.uint(2 * x if x >= 0 else -2 * x - 1)

    def boolean(self, x: bool) -> "Encoder":
        self._parts.append(b"\x01" if x else b"\x00")
        return self

    def float64(self, x: float) -> "Encoder":
        self._parts.append(struct.pack("<d", x))
        return self

    def fixed(self, x: int, nbytes: int) -> "Encoder":
        self._parts.append(x.to_bytes(nbytes, "little"))
        return self

    def raw(self, b: bytes) -> "Encoder":
        self.uint(len(b))
        self._parts.append(bytes(b))
        return self

    def text(self, s: str) -> "Encoder":
        return self.raw(s.encode("utf-8"))

    def packed(self, values: Sequence[int]) -> "Encoder":
        """Fixed-width bit packing: width, then len(values)*width bits."""
        w = max((v.bit_length() for v in values), default=0)
        self.uint(len(values)).uint(w)
        acc = 0
        for v in values:
            acc = (acc << w) | v
        nbytes = (len(values) * w + 7) // 8
        self._parts.append(acc.to_bytes(nbytes, "big"))
        return self

    def getvalue(self) -> bytes:
        return b"".join(self._parts)


class Decoder:
    def __init__(self, data: bytes):
        self.data = memoryview(data)
        self.pos = 0

    def uint(self) -> int:
        x = shift = 0
        while True:
            b = self.data[self.pos]
            self.pos += 1
            x |= (b & 0x7F) << shift
            shift += 7
            if not b & 0x80:
                return x

    def sint(self) -> int:
        z = self.uint()
        return z >> 1 if not z & 1 else -((z + 1) >> 1)

    def boolean(self) -> bool:
        b = self.data[self.pos]
        self.pos += 1
        return bool(b)

    def float64(self) -> float:
        (x,) = struct.unpack_from("<d", self.data, self.pos)
        self.pos += 8
        return x

    def fixed(self, nbytes: int) -> int:
        x = int.from_bytes(self.data[self.pos:self.pos + nbytes], "little")
        self.pos += nbytes
        return x

    def raw(self) -> bytes:
        n = self.uint()
        b = bytes(self.data[self.pos:self.pos + n])
        self.pos += n
        return b

    def text(self) -> str:
        return self.raw().decode("utf-8")

    def packed(self) -> list[int]:
        count, w = self.uint(), self.uint()
        nbytes = (count * w + 7) // 8
        acc = int.from_bytes(self.data[self.pos:self.pos + nbytes], "big")
        self.pos += nbytes
        mask = (1 << w) - 1
        return [(acc >> (w * (count - 1 - i))) & mask for i in range(count)]

    def done(self) -> bool:
        return self.pos == len(self.data)


# ---------------------------------------------------------------- algorithms

_REGISTRY: dict[str, type] = {}


def register(cls):
    _REGISTRY[cls.algorithm_id] = cls
    return cls


def algorithm_class(algorithm_id: str):
    return _REGISTRY[algorithm_id]


class StreamAlgorithm:
    """Common surface for everything the game can run.

    Subclasses implement `process`, `answer`, `encode` and `decode`; the
    encoding must cover every mutable field so decode(encode(x)) continues
    exactly like x.
    """

    algorithm_id = "abstract"

    def process(self, update, tape: RandomTape) -> None:
        raise NotImplementedError

    def answer(self):
        raise NotImplementedError

    def encode(self, enc: Encoder) -> None:
        raise NotImplementedError

    @classmethod
    def decode(cls, dec: Decoder):
        raise NotImplementedError

    def to_bytes(self) -> bytes:
        enc = Encoder()
        self.encode(enc)
        return enc.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes):
        dec = Decoder(data)
        obj = cls.decode(dec)
        if not dec.done():
            raise ValueError(f"{len(dec.data) - dec.pos} trailing bytes in state")
        return obj

    def clone(self):
        return type(self).from_bytes(self.to_bytes())


@dataclass
class ExposedState:
    """What the white-box adversary sees after a round: D_t, R_t and A_t.

    The snapshot is produced on demand by `materialize`, which returns an
    independent copy of the algorithm as it stood at the end of the round.
    """

    algorithm_id: str
    round: int
    round_randomness: tuple = ()
    materialize: Callable[[], StreamAlgorithm] | None = field(default=None, repr=False)
    _snapshot: StreamAlgorithm | None = field(default=None, repr=False)
    _bytes: bytes | None = field(default=None, repr=False)
    _answer: object = field(default=None, repr=False)
    _answered: bool = field(default=False, repr=False)

    @property
    def algorithm(self) -> StreamAlgorithm:
        """A private copy of the algorithm at this round (never the live one)."""
        if self._snapshot is None:
            if self._bytes is not None:
                self._snapshot = algorithm_class(self.algorithm_id).from_bytes(self._bytes)
            else:
                self._snapshot = self.materialize()
                self.materialize = None
        return self._snapshot

    @property
    def state_bytes(self) -> bytes:
        if self._bytes is None:
            self._bytes = self.algorithm.to_bytes()
        return self._bytes

    @property
    def answer(self):
        if not self._answered:
            self._answer = self.algorithm.answer()
            self._answered = True
        return self._answer

    @property
    def randomness_bits(self) -> int:
        return WORD_BITS * len(self.round_randomness)

    def freeze(self) -> None:
        """Force the snapshot now; used when the live object is about to change."""
        self.algorithm


def serialize_state(alg: StreamAlgorithm, round: int = 0, round_randomness=()) -> ExposedState:
    data = alg.to_bytes()
    return ExposedState(alg.algorithm_id, round, tuple(round_randomness), _bytes=data)


def resume(state: ExposedState) -> StreamAlgorithm:
    return algorithm_class(state.algorithm_id).from_bytes(state.state_bytes)


def state_size_bits(state: ExposedState | bytes) -> int:
    data = state if isinstance(state, (bytes, bytearray)) else state.state_bytes
    return 8 * len(data)


# ---------------------------------------------------------------- files


def parse_stream_lines(lines: Iterable[str]) -> list[StreamUpdate]:
    """`coordinate delta` per line; a lone coordinate means +1; `#` starts a comment."""
    out = []
    for lineno, line in enumerate(lines, 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if len(parts) == 1:
                out.append(StreamUpdate(int(parts[0]), 1))
            elif len(parts) == 2:
                out.append(StreamUpdate(int(parts[0]), int(parts[1])))
            else:
                raise ValueError
        except ValueError:
            raise StreamError(f"line {lineno}: expected 'coordinate delta', got {line!r}") from None
    return out


def read_stream_file(path) -> list[StreamUpdate]:
    with open(path) as fh:
        return parse_stream_lines(fh)


def write_stream_file(path, updates: Iterable[StreamUpdate]) -> None:
    with open(path, "w") as fh:
        for c, d in updates:
            fh.write(f"{c} {d}\n")
