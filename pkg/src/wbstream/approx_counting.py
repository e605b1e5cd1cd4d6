"""Morris approximate counter with median-of-copies confidence boosting."""
from __future__ import annotations

import math
from itertools import accumulate
from operator import mul

from .stream_core import Decoder, Encoder, RandomTape, StreamAlgorithm, probability_threshold, register

ONE = 1 << 64

# per-base cache indexed by level X: (1+a)^-X, log(1 - (1+a)^-X), word threshold
_LEVEL_TABLES: dict[float, tuple[list, list, list]] = {}


@register
class MorrisCounter(StreamAlgorithm):
    """r independent Morris counters with base 1+a; the median answers.

    Each copy moves from level X to X+1 with probability (1+a)^-X, using
    fresh tape words. To avoid one tape word per copy per increment, a round
    first draws a single word deciding whether *any* copy moves, then
    resolves which ones conditionally. The joint law of the copies is the
    same as drawing them one by one.
    """

    algorithm_id = "morris"

    def __init__(self, a: float, r: int = 1, levels=None):
        if a <= 0:
            raise ValueError("base parameter a must be positive")
        if r < 1:
            raise ValueError("need at least one copy")
        self.a = float(a)
        self.r = r
        self.levels = list(levels) if levels is not None else [0] * r
        if len(self.levels) != r:
            raise ValueError("levels length must equal r")
        self._log_base = math.log1p(self.a)
        self._refresh()

    @classmethod
    def from_accuracy(cls, eps: float, delta: float) -> "MorrisCounter":
        if not 0 < eps < 1 or not 0 < delta < 1:
            raise ValueError("eps and delta must lie in (0, 1)")
        r = max(1, math.ceil(8 * math.log(1 / delta)))
        if r % 2 == 0:
            r += 1
        return cls(eps * eps / 32, r)

    def _tables(self, top: int):
        probs, logs, thresholds = _LEVEL_TABLES.setdefault(self.a, ([], [], []))
        lb = self._log_base
        while len(probs) <= top:
            p = math.exp(-len(probs) * lb)
            probs.append(p)
            logs.append(math.log1p(-p) if p < 1 else -math.inf)
            thresholds.append(probability_threshold(p))
        return probs, logs, thresholds

    def _refresh(self) -> None:
        probs, logs, _ = self._tables(max(self.levels) + 1)
        log_none = math.fsum([logs[x] for x in self.levels])
        self._any_threshold = probability_threshold(-math.expm1(log_none))

    def increment(self, tape: RandomTape) -> None:
        thr = self._any_threshold
        if thr < ONE and (thr == 0 or tape.word() >= thr):
            return
        self._resolve(tape)

    def add(self, k: int, tape: RandomTape) -> None:
        """k increments, consuming the tape exactly as k calls to increment()."""
        word = tape.word
        for _ in range(k):
            thr = self._any_threshold
            if thr < ONE and (thr == 0 or word() >= thr):
                continue
            self._resolve(tape)

    def _resolve(self, tape: RandomTape) -> None:
        # at least one copy moves: walk copies conditioning on that event
        # until the first one moves, then the rest are unconditioned
        probs, _, thresholds = _LEVEL_TABLES[self.a]
        levels, r, word = self.levels, self.r, tape.word
        # none_suffix[i] = P(no copy among i.. moves)
        none_suffix = list(accumulate([1.0 - probs[x] for x in reversed(levels)], mul, initial=1.0))[::-1]
        i = 0
        while i < r:
            thr = probability_threshold(probs[levels[i]] / (1.0 - none_suffix[i]))
            i += 1
            if thr >= ONE or (thr > 0 and word() < thr):
                levels[i - 1] += 1
                break
        rest = [thresholds[x] for x in levels[i:]]
        draws = iter(tape.words(sum(1 for t in rest if 0 < t < ONE)))
        for j, thr in enumerate(rest, i):
            if thr >= ONE or (thr > 0 and next(draws) < thr):
                levels[j] += 1
        self._refresh()

    def process(self, update, tape: RandomTape) -> None:
        self.increment(tape)

    def copy_estimate(self, x: int) -> float:
        return math.expm1(x * self._log_base) / self.a

    def estimate(self) -> float:
        s = sorted(self.levels)
        mid = self.r // 2
        if self.r % 2:
            return self.copy_estimate(s[mid])
        return (self.copy_estimate(s[mid - 1]) + self.copy_estimate(s[mid])) / 2

    def median_level(self) -> int:
        return sorted(self.levels)[self.r // 2]

    answer = estimate

    def encode(self, enc: Encoder) -> None:
        enc.float64(self.a).packed(self.levels)

    @classmethod
    def decode(cls, dec: Decoder) -> "MorrisCounter":
        a = dec.float64()
        levels = dec.packed()
        return cls(a, len(levels), levels)

    def clone(self) -> "MorrisCounter":
        other = object.__new__(MorrisCounter)
        other.a, other.r, other._log_base = self.a, self.r, self._log_base
        other.levels = self.levels[:]
        other._any_threshold = self._any_threshold
        return other

    def level_bound(self, m: int) -> int:
        """ceil(log_{1+a}(m(1+a))): no copy exceeds this after m increments."""
        if m <= 0:
            return 0
        return math.ceil(math.log(m * (1 + self.a)) / self._log_base)
