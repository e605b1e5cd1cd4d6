"""Concrete adversaries: oblivious replay, state-reading stressors and attacks."""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np
import sympy

from ..pattern_matching import SymbolUpdate
from ..stream_core import StreamUpdate
from .harness import Adversary, AdversaryView
from .targets import KR_PRIME_RANGE


class ObliviousAdversary(Adversary):
    """Plays a fixed list of updates and ignores everything it is shown."""

    def __init__(self, updates: Iterable):
        self.updates = list(updates)
        self._i = 0

    def next_update(self, view):
        if self._i >= len(self.updates):
            return None
        u = self.updates[self._i]
        self._i += 1
        return u


class PlantedStreamAdversary(Adversary):
    """Oblivious baseline: the planted item at evenly spaced rounds, uniform
    random distractors otherwise. Never looks at the state."""

    def __init__(self, n: int, planted: int, planted_count: int, distractor_count: int):
        if n < 2:
            raise ValueError("need a distractor besides the planted item")
        self.n, self.planted = n, planted
        self.planted_count, self.total = planted_count, planted_count + distractor_count
        self.emitted = self.planted_emitted = 0

    def next_update(self, view):
        if self.emitted >= self.total:
            return None
        self.emitted += 1
        if self.planted_emitted * self.total < self.planted_count * self.emitted:
            self.planted_emitted += 1
            return StreamUpdate(self.planted, 1)
        j = view.rng.randint(1, self.n - 1)
        return StreamUpdate(j + (j >= self.planted), 1)


def exposed_counters(alg) -> dict:
    """The counter table a state-reading adversary looks at for each sketch type."""
    from ..heavy_hitters import BernMG, CompressedHeavyHitters, MisraGries, RobustHeavyHitters
    from ..hierarchical_hh import BernHHH, DeterministicHHH, RobustHHH

    if isinstance(alg, MisraGries):
        return alg.table
    if isinstance(alg, BernMG):
        return alg.inner.table
    if isinstance(alg, RobustHeavyHitters):
        return alg.reporter.inner.table
    if isinstance(alg, CompressedHeavyHitters):
        return alg.inner.reporter.inner.table
    if isinstance(alg, DeterministicHHH):
        return alg.levels[0].table
    if isinstance(alg, BernHHH):
        return alg.inner.levels[0].table
    if isinstance(alg, RobustHHH):
        return alg.reporter.inner.levels[0].table
    raise TypeError(f"no counter view for {type(alg).__name__}")


class SmallestCounterAdversary(Adversary):
    """Plants `planted_count` copies of one item, spread evenly, among distractors.

    Each distractor is the non-planted item whose exposed counter is the
    smallest (items missing from the table count as 0; ties go to the
    lowest id). This keeps the summary's decrement machinery as busy as
    possible. In black-box mode the adversary cannot read the table and
    cycles through the universe instead.
    """

    def __init__(self, n: int, planted: int, planted_count: int, distractor_count: int):
        self.n, self.planted = n, planted
        self.planted_count, self.total = planted_count, planted_count + distractor_count
        self.emitted = 0
        self.planted_emitted = 0
        self._cycle = 0

    def next_update(self, view: AdversaryView):
        if self.emitted >= self.total:
            return None
        self.emitted += 1
        # planted copies fall at evenly spaced rounds
        if self.planted_emitted * self.total < self.planted_count * self.emitted:
            self.planted_emitted += 1
            return StreamUpdate(self.planted, 1)
        return StreamUpdate(self._distractor(view), 1)

    def _distractor(self, view: AdversaryView) -> int:
        if not view.white_box:
            self._cycle = self._cycle % self.n + 1
            if self._cycle == self.planted:
                self._cycle = self._cycle % self.n + 1
            return self._cycle
        table = exposed_counters(view.state.algorithm)
        best, best_count = None, None
        for item in range(1, self.n + 1):
            if item == self.planted:
                continue
            c = table.get(item, 0)
            if c == 0:
                return item
            if best_count is None or c < best_count:
                best, best_count = item, c
        return best


class FermatAdversary(Adversary):
    """Builds U with U[i]=1 and V with V[i+p-1]=1, both of length i+p.

    sum_j U[j] x^j = x^i = x^(i+p-1) = sum_j V[j] x^j mod p, so the
    Karp-Rabin tester calls them equal. With p=None the adversary reads p
    from the exposed initial state; in black-box mode it has to guess.
    """

    def __init__(self, p: int | None = None, i: int = 1):
        if p is not None and not sympy.isprime(p):
            raise ValueError(f"{p} is not prime")
        if i < 1:
            raise ValueError("i must be at least 1")
        self.p, self.i = p, i
        self._plan: list | None = None

    def plan(self, p: int) -> list[SymbolUpdate]:
        length = self.i + p
        u = [SymbolUpdate(0, int(j == self.i)) for j in range(1, length + 1)]
        v = [SymbolUpdate(1, int(j == self.i + p - 1)) for j in range(1, length + 1)]
        return u + v

    def _guess_prime(self, view: AdversaryView) -> int:
        lo, hi = KR_PRIME_RANGE
        while True:
            cand = view.rng.randint(lo, hi)
            if sympy.isprime(cand):
                return cand

    def next_update(self, view: AdversaryView):
        if self._plan is None:
            p = self.p
            if p is None:
                p = view.state.algorithm.p if view.white_box else self._guess_prime(view)
            self._plan = self.plan(p)
            self._plan.reverse()
        return self._plan.pop() if self._plan else None


def fermat_karp_rabin_adversary(p: int, x: int | None = None, i: int = 1) -> FermatAdversary:
    """The collision works for every base x, so x only documents the target."""
    return FermatAdversary(p, i)


class SignCancellationAdversary(Adversary):
    """Greedy attack on an AMS sketch: insert the coordinate j that minimizes
    sum_k (y_k + Z_kj)^2, i.e. drives the sketch's squared rows toward 0.

    White-box it reads Z and y from the state. Black-box it runs the same
    greedy rule against signs Z' it draws itself.
    """

    def __init__(self, rounds: int | None = None, shape: tuple[int, int] | None = None):
        self.rounds = rounds
        self.shape = shape  # (n, r), public sketch dimensions for the black-box variant
        self._emitted = 0
        self._Z = None
        self._y = None

    def next_update(self, view: AdversaryView):
        if self.rounds is not None and self._emitted >= self.rounds:
            return None
        if view.white_box:
            alg = view.state.algorithm
            Z, y = alg.Z, alg.y
        else:
            if self._Z is None:
                if self.shape is None:
                    raise ValueError("black-box sign cancellation needs shape=(n, r)")
                n, r = self.shape
                self._Z = np.array([[view.rng.choice((-1, 1)) for _ in range(n)] for _ in range(r)], dtype=np.int64)
                self._y = np.zeros(r, dtype=np.int64)
            Z, y = self._Z, self._y
        scores = ((y[:, None] + Z) ** 2).sum(axis=0)
        j = int(np.argmin(scores))
        if not view.white_box:
            self._y = self._y + Z[:, j]
        self._emitted += 1
        return StreamUpdate(j + 1, 1)


class StoppingTimeAdversary(Adversary):
    """For counters: keep inserting and stop as soon as the exposed estimate is
    off by more than `trigger` (relative), or after `m` insertions.

    Any window [m_min, m] of stopping times is fair game; the adversary picks
    the one that looks worst for the counter given everything it has seen.
    """

    def __init__(self, m: int, m_min: int | None = None, trigger: float = 0.05, coordinate: int = 1):
        self.m, self.m_min, self.trigger, self.coordinate = m, m_min or m // 2, trigger, coordinate
        self.count = 0

    def next_update(self, view: AdversaryView):
        if self.count >= self.m:
            return None
        if self.count >= self.m_min:
            est = view.state.answer
            if abs(est - self.count) > self.trigger * self.count:
                return None
        self.count += 1
        return StreamUpdate(self.coordinate, 1)


class CollisionSearchAdversary(Adversary):
    """Time-bounded attack on compressed heavy hitters.

    It hashes candidate ids with instrumented exponentiations, looking for
    a light id whose truncated fingerprint equals the planted heavy id's.
    If one turns up within budget it is inserted a few times so the light
    id could inherit the heavy id's counter; otherwise the stream is just
    the planted item among distinct distractors.
    """

    def __init__(self, n: int, planted: int, planted_count: int, distractor_count: int,
                 hash_bits: int, time_budget: int):
        self.n, self.planted = n, planted
        self.planted_count, self.distractor_count = planted_count, distractor_count
        self.hash_bits = hash_bits
        self.time_budget = time_budget
        self._plan = None
        self.found: int | None = None

    def _search(self, view: AdversaryView):
        from ..crypto_prims import DlFingerprinter

        fp = DlFingerprinter()
        mask = (1 << self.hash_bits) - 1
        target = view.ops.pow(fp.g, self.planted, fp.p) & mask
        for cand in range(1, self.n + 1):
            if cand == self.planted:
                continue
            if view.ops.budget is not None and view.ops.used + 2 * cand.bit_length() > view.ops.budget:
                break
            if view.ops.pow(fp.g, cand, fp.p) & mask == target:
                return cand
        return None

    def next_update(self, view: AdversaryView):
        if self._plan is None:
            self.found = self._search(view)
            plan = []
            distract = [j for j in range(1, self.n + 1) if j != self.planted and j != self.found]
            total = self.planted_count + self.distractor_count
            k = planted = 0
            for t in range(1, total + 1):
                if planted * total < self.planted_count * t:
                    plan.append(StreamUpdate(self.planted, 1))
                    planted += 1
                else:
                    plan.append(StreamUpdate(distract[k % len(distract)], 1))
                    k += 1
            if self.found is not None:
                plan.extend([StreamUpdate(self.found, 1)] * 4)
            plan.reverse()
            self._plan = plan
        return self._plan.pop() if self._plan else None
