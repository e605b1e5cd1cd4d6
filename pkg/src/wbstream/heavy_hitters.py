"""Misra-Gries, Bernoulli-sampled Misra-Gries, and the robust L1 heavy hitters.

Reports are lists of (item, estimate) sorted by item.
"""
from __future__ import annotations

import math
from typing import Mapping, NamedTuple

from .approx_counting import MorrisCounter
from .crypto_prims import DlFingerprinter
from .stream_core import (
    DEFAULT_M_CAP,
    Decoder,
    Encoder,
    RandomTape,
    StreamAlgorithm,
    probability_threshold,
    register,
)

ONE = 1 << 64
SAMPLING_CONSTANT = 16


@register
class MisraGries(StreamAlgorithm):
    """k counters; every reported count obeys f - d <= f_hat <= f.

    d counts decrement-all steps, and d <= m / (k + 1).
    """

    algorithm_id = "mg"

    def __init__(self, k: int, table: Mapping[int, int] | None = None, m: int = 0, decrements: int = 0):
        if k < 1:
            raise ValueError("need at least one counter")
        self.k = k
        self.table = dict(table or {})
        self.m = m
        self.decrements = decrements

    @classmethod
    def with_epsilon(cls, eps: float) -> "MisraGries":
        return cls(math.ceil(1 / eps - 1e-12))

    @property
    def epsilon(self) -> float:
        return 1 / self.k

    def update(self, item: int) -> None:
        self.m += 1
        table = self.table
        if item in table:
            table[item] += 1
        elif len(table) < self.k:
            table[item] = 1
        else:
            self.decrements += 1
            for key in list(table):
                if table[key] == 1:
                    del table[key]
                else:
                    table[key] -= 1

    def process(self, update, tape: RandomTape | None = None) -> None:
        self.update(update[0])

    def estimate(self, item: int) -> int:
        return self.table.get(item, 0)

    def upper(self, item: int) -> int:
        return self.table.get(item, 0) + self.decrements

    def report(self, threshold: float | None = None) -> list[tuple[int, int]]:
        items = sorted(self.table.items())
        if threshold is None:
            return items
        return [(i, c) for i, c in items if c >= threshold]

    answer = report

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.k).uint(self.m).uint(self.decrements).uint(len(self.table))
        for item, count in sorted(self.table.items()):
            enc.uint(item).uint(count)

    @classmethod
    def decode(cls, dec: Decoder) -> "MisraGries":
        k, m, d, size = dec.uint(), dec.uint(), dec.uint(), dec.uint()
        table = {}
        for _ in range(size):
            item = dec.uint()
            table[item] = dec.uint()
        return cls(k, table, m, d)

    def clone(self) -> "MisraGries":
        other = object.__new__(MisraGries)
        other.k, other.m, other.decrements = self.k, self.m, self.decrements
        other.table = self.table.copy()
        return other


def sampling_rate(n: int, m_guess: float, eps: float, delta: float, C: float = SAMPLING_CONSTANT) -> float:
    return min(1.0, C * math.log(n / delta) / (eps * eps * m_guess))


@register
class BernMG(StreamAlgorithm):
    """Bernoulli sampling at rate p_s feeding a Misra-Gries with error eps/2.

    The report keeps items whose upper count on the sample reaches 3/4 of
    an eps share of the sample, and scales estimates back by 1/p_s.
    """

    algorithm_id = "bernmg"

    def __init__(self, n: int, m_guess: float, eps: float, delta: float, C: float = SAMPLING_CONSTANT,
                 inner: MisraGries | None = None):
        if not 0 < eps < 1 or not 0 < delta < 1:
            raise ValueError("eps and delta must lie in (0, 1)")
        self.n, self.m_guess, self.eps, self.delta, self.C = n, float(m_guess), float(eps), float(delta), float(C)
        self.p = sampling_rate(n, self.m_guess, self.eps, self.delta, self.C)
        self._threshold = probability_threshold(self.p)
        self.inner = inner if inner is not None else MisraGries.with_epsilon(eps / 2)

    def process(self, update, tape: RandomTape) -> None:
        thr = self._threshold
        if thr >= ONE or tape.word() < thr:
            self.inner.update(update[0])

    def sampled(self) -> int:
        return self.inner.m

    def report(self) -> list[tuple[int, float]]:
        mg = self.inner
        cut = 0.75 * self.eps * mg.m
        scale = 1 / self.p
        d = mg.decrements
        return [(i, c * scale) for i, c in sorted(mg.table.items()) if c + d >= cut and c > 0]

    answer = report

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.n).float64(self.m_guess).float64(self.eps).float64(self.delta).float64(self.C)
        self.inner.encode(enc)

    @classmethod
    def decode(cls, dec: Decoder) -> "BernMG":
        n, mg, eps, delta, C = dec.uint(), dec.float64(), dec.float64(), dec.float64(), dec.float64()
        return cls(n, mg, eps, delta, C, MisraGries.decode(dec))

    def clone(self) -> "BernMG":
        other = object.__new__(BernMG)
        other.__dict__.update(self.__dict__)
        other.inner = self.inner.clone()
        return other


class MCapExceeded(OverflowError):
    pass


@register
class RobustHeavyHitters(StreamAlgorithm):
    """eps-L1 heavy hitters against white-box adversaries.

    A Morris counter tracks the stream length; two BernMG instances run at
    guesses G^c and G^(c+1) with G = 16/eps. Once the Morris estimate reaches
    G^c the older instance is dropped and a new one started one step higher.
    Answers come from instance c.
    """

    algorithm_id = "robust_hh"

    def __init__(self, n: int, eps: float, m_cap: int = DEFAULT_M_CAP, C: float = SAMPLING_CONSTANT,
                 morris_delta: float = 1 / 16, _fresh: bool = True):
        if not 0 < eps < 1:
            raise ValueError("eps must lie in (0, 1)")
        self.n, self.eps, self.m_cap, self.C, self.morris_delta = n, float(eps), m_cap, float(C), float(morris_delta)
        self.ratio = 16 / self.eps
        self.delta = self.eps / (4 * math.log2(m_cap))
        if _fresh:
            self.morris = MorrisCounter.from_accuracy(self.eps, self.morris_delta)
            self.c = 1
            self.instances = [self._instance(1), self._instance(2)]
            self._set_cut()

    def _instance(self, i: int) -> BernMG:
        return BernMG(self.n, self.ratio ** i, self.eps / 2, self.delta, self.C)

    def _set_cut(self) -> None:
        # smallest median Morris level whose estimate reaches G^c, and the cap
        self._roll_level = self._level_reaching(self.ratio ** self.c)
        self._cap_level = self._level_reaching(self.m_cap, strict=True)

    def _level_reaching(self, target: float, strict: bool = False) -> int:
        m = self.morris
        x = max(0, math.floor(math.log1p(target * m.a) / math.log1p(m.a)) - 2)
        while (m.copy_estimate(x) <= target) if strict else (m.copy_estimate(x) < target):
            x += 1
        return x

    def process(self, update, tape: RandomTape) -> None:
        self.morris.increment(tape)
        for inst in self.instances:
            inst.process(update, tape)
        level = self.morris.median_level()
        if level >= self._cap_level:
            raise MCapExceeded(f"stream length estimate exceeds m_cap={self.m_cap}")
        if level >= self._roll_level:
            # delete A_c, c <- c + 1, start A_{c+1}
            self.c += 1
            self.instances = [self.instances[1], self._instance(self.c + 1)]
            self._set_cut()

    @property
    def reporter(self) -> BernMG:
        return self.instances[0]

    def length_estimate(self) -> float:
        return self.morris.estimate()

    def report(self) -> list[tuple[int, float]]:
        return self.reporter.report()

    answer = report

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.n).float64(self.eps).uint(self.m_cap).float64(self.C).float64(self.morris_delta)
        enc.uint(self.c)
        self.morris.encode(enc)
        for inst in self.instances:
            inst.inner.encode(enc)

    @classmethod
    def decode(cls, dec: Decoder) -> "RobustHeavyHitters":
        n, eps, m_cap, C, md = dec.uint(), dec.float64(), dec.uint(), dec.float64(), dec.float64()
        self = cls(n, eps, m_cap, C, md, _fresh=False)
        self.c = dec.uint()
        self.morris = MorrisCounter.decode(dec)
        self.instances = []
        for i in (self.c, self.c + 1):
            inst = self._instance(i)
            inst.inner = MisraGries.decode(dec)
            self.instances.append(inst)
        self._set_cut()
        return self

    def clone(self) -> "RobustHeavyHitters":
        other = object.__new__(RobustHeavyHitters)
        other.__dict__.update(self.__dict__)
        other.morris = self.morris.clone()
        other.instances = [inst.clone() for inst in self.instances]
        return other


class CompressedReport(NamedTuple):
    items: list
    collision: bool


def default_hashed_universe(n: int, eps: float, T: int) -> int:
    return max(2, math.ceil((math.log2(max(n, 2)) / eps * T) ** 2))


@register
class CompressedHeavyHitters(StreamAlgorithm):
    """(phi, eps) heavy hitters keyed by DL-fingerprinted ids.

    The robust sketch counts hashed ids only; full ids are kept just for
    hashed ids whose estimate clears (phi - eps/2) of the stream length.
    Two full ids landing on one stored hash id mark the run as collided.
    """

    algorithm_id = "compressed_hh"

    def __init__(self, n: int, phi: float, eps: float, T: int = 10 ** 6, universe: int | None = None,
                 m_cap: int = DEFAULT_M_CAP, _fresh: bool = True):
        if phi < eps:
            raise ValueError("need phi >= eps")
        self.n, self.phi, self.eps, self.T, self.m_cap = n, float(phi), float(eps), T, m_cap
        self.universe = universe or default_hashed_universe(n, eps, T)
        self.hash_bits = max(1, (self.universe - 1).bit_length())
        self.crhf = DlFingerprinter()
        self.id_bits = max(1, n.bit_length())
        if _fresh:
            self.inner = RobustHeavyHitters(1 << self.hash_bits, eps, m_cap)
            self.id_store: dict[int, int] = {}
            self.collision = False

    def hash_id(self, item: int) -> int:
        return self.crhf.of_int(item) & ((1 << self.hash_bits) - 1)

    def _cut(self) -> float:
        return (self.phi - self.eps / 2) * self.inner.length_estimate()

    def process(self, update, tape: RandomTape) -> None:
        item = update[0]
        y = self.hash_id(item)
        self.inner.process((y, 1), tape)
        est = dict(self.inner.report()).get(y, 0.0)
        cut = self._cut()
        store = self.id_store
        if est >= cut:
            prev = store.get(y)
            if prev is not None and prev != item:
                self.collision = True
            store[y] = item
        # prune ids whose hashed estimate fell below the retention cut
        if len(store) > 2 / max(self.phi - self.eps / 2, 1e-9):
            live = dict(self.inner.report())
            for key in [k for k in store if live.get(k, 0.0) < cut]:
                del store[key]

    def report(self) -> CompressedReport:
        cut = self._cut()
        items = [(self.id_store[y], est) for y, est in self.inner.report()
                 if est >= cut and y in self.id_store]
        items.sort()
        return CompressedReport(items, self.collision)

    answer = report

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.n).float64(self.phi).float64(self.eps).uint(self.T).uint(self.universe).uint(self.m_cap)
        self.inner.encode(enc)
        enc.boolean(self.collision).uint(len(self.id_store))
        for y, item in sorted(self.id_store.items()):
            enc.uint(y).uint(item)

    @classmethod
    def decode(cls, dec: Decoder) -> "CompressedHeavyHitters":
        n, phi, eps, T, universe, m_cap = dec.uint(), dec.float64(), dec.float64(), dec.uint(), dec.uint(), dec.uint()
        self = cls(n, phi, eps, T, universe, m_cap, _fresh=False)
        self.inner = RobustHeavyHitters.decode(dec)
        self.collision = dec.boolean()
        self.id_store = {}
        for _ in range(dec.uint()):
            y = dec.uint()
            self.id_store[y] = dec.uint()
        return self

    def clone(self) -> "CompressedHeavyHitters":
        other = object.__new__(CompressedHeavyHitters)
        other.__dict__.update(self.__dict__)
        other.inner = self.inner.clone()
        other.id_store = dict(self.id_store)
        return other


def inner_product_estimate(f_sample: Mapping[int, int], p_f: float, g_sample: Mapping[int, int], p_g: float) -> float:
    """<f'/p_f, g'/p_g> for Bernoulli samples f', g' taken at rates p_f, p_g."""
    if not (0 < p_f <= 1 and 0 < p_g <= 1):
        raise ValueError("sampling rates must lie in (0, 1]")
    if len(g_sample) < len(f_sample):
        f_sample, g_sample = g_sample, f_sample
    total = sum(c * g_sample.get(i, 0) for i, c in f_sample.items())
    return total / (p_f * p_g)


def required_rate(eps: float, mass: int) -> float:
    """Smallest admissible rate s/m with s = 1/eps^2."""
    return min(1.0, 1 / (eps * eps * mass))
