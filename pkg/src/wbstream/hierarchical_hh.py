"""Hierarchical heavy hitters over a tree-shaped domain.

Prefixes are (level, id) pairs; level 0 holds the leaves 1..n.
"""
from __future__ import annotations

import math
from typing import Iterable, Mapping, Sequence

from .approx_counting import MorrisCounter
from .heavy_hitters import SAMPLING_CONSTANT, MCapExceeded, MisraGries, sampling_rate
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

Prefix = tuple  # (level, id)


class Hierarchy:
    """Leaves [n] plus h levels of parents; parents[i][x] is the level-(i+1) parent of level-i prefix x."""

    def __init__(self, n: int, parents: Sequence[Mapping[int, int]], fanout: int | None = None):
        if n < 1:
            raise ValueError("need at least one leaf")
        self.n = n
        self.parents = [dict(level) for level in parents]
        self.fanout = fanout
        self.height = len(self.parents)
        ids = set(range(1, n + 1))
        for i, level in enumerate(self.parents):
            if set(level) != ids:
                raise ValueError(f"level {i} parent map must cover every level-{i} prefix")
            ids = set(level.values())
        # leaf -> ancestor id per level, for fast updates
        self._anc = [[0] * (self.height + 1) for _ in range(n + 1)]
        for leaf in range(1, n + 1):
            x = leaf
            self._anc[leaf][0] = x
            for i, level in enumerate(self.parents, 1):
                x = level[x]
                self._anc[leaf][i] = x

    @classmethod
    def with_fanout(cls, n: int, b: int = 2) -> "Hierarchy":
        if b < 2:
            raise ValueError("fanout must be at least 2")
        parents = []
        size = n
        while size > 1:
            parents.append({x: (x - 1) // b + 1 for x in range(1, size + 1)})
            size = -(-size // b)
        if not parents:
            parents.append({1: 1})
        return cls(n, parents, fanout=b)

    def ancestor(self, leaf: int, level: int) -> int:
        return self._anc[leaf][level]

    def ancestors(self, leaf: int) -> list[int]:
        return self._anc[leaf]

    def prefixes(self, level: int) -> list[int]:
        if level == 0:
            return list(range(1, self.n + 1))
        return sorted(set(self.parents[level - 1].values()))

    def all_prefixes(self) -> list[Prefix]:
        return [(lv, x) for lv in range(self.height + 1) for x in self.prefixes(lv)]

    def elements(self, prefixes: Iterable[Prefix]) -> set[int]:
        want = set(prefixes)
        return {leaf for leaf in range(1, self.n + 1)
                if any((lv, self._anc[leaf][lv]) in want for lv in range(self.height + 1))}

    def is_ancestor(self, a: Prefix, b: Prefix) -> bool:
        """True if a is a strict ancestor of b."""
        (la, xa), (lb, xb) = a, b
        if la <= lb:
            return False
        x = xb
        for lv in range(lb, la):
            x = self.parents[lv][x]
        return x == xa

    def to_lines(self) -> list[str]:
        return [f"{lv} {child} {parent}" for lv, level in enumerate(self.parents) for child, parent in sorted(level.items())]

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> "Hierarchy":
        levels: dict[int, dict[int, int]] = {}
        for lineno, line in enumerate(lines, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                lv, child, parent = map(int, line.split())
            except ValueError:
                raise ValueError(f"line {lineno}: expected 'level child parent'") from None
            levels.setdefault(lv, {})[child] = parent
        if sorted(levels) != list(range(len(levels))):
            raise ValueError("levels must be numbered 0..h-1 without gaps")
        n = len(levels.get(0, {}))
        return cls(n, [levels[i] for i in range(len(levels))])

    def encode(self, enc: Encoder) -> None:
        enc.uint(self.n).uint(self.fanout or 0)
        if not self.fanout:
            enc.uint(self.height)
            for level in self.parents:
                for child in sorted(level):
                    enc.uint(level[child])

    @classmethod
    def decode(cls, dec: Decoder) -> "Hierarchy":
        n, b = dec.uint(), dec.uint()
        if b:
            return _cached_fanout(n, b)
        h = dec.uint()
        parents, size = [], n
        for _ in range(h):
            level = {child: dec.uint() for child in range(1, size + 1)}
            parents.append(level)
            size = len(set(level.values()))
        return cls(n, parents)

    def __eq__(self, other):
        return isinstance(other, Hierarchy) and self.n == other.n and self.parents == other.parents

    __hash__ = None


_FANOUT_CACHE: dict[tuple[int, int], Hierarchy] = {}


def _cached_fanout(n: int, b: int) -> Hierarchy:
    key = (n, b)
    if key not in _FANOUT_CACHE:
        _FANOUT_CACHE[key] = Hierarchy.with_fanout(n, b)
    return _FANOUT_CACHE[key]


# ---------------------------------------------------------------- exact oracle


def prefix_frequencies(f: Sequence[int], hierarchy: Hierarchy) -> dict[Prefix, int]:
    """f*_p for every prefix p; f is the leaf frequency vector over [n]."""
    out = {p: 0 for p in hierarchy.all_prefixes()}
    for leaf, count in enumerate(f, 1):
        if count:
            for lv, x in enumerate(hierarchy.ancestors(leaf)):
                out[(lv, x)] += count
    return out


def residual_mass(q: Prefix, reported: Iterable[Prefix], f: Sequence[int], hierarchy: Hierarchy) -> int:
    """Mass under q outside the subtrees of reported descendants of q."""
    lq, xq = q
    below = [p for p in reported if hierarchy.is_ancestor(q, p)]
    covered = hierarchy.elements(below)
    return sum(count for leaf, count in enumerate(f, 1)
               if hierarchy.ancestor(leaf, lq) == xq and leaf not in covered)


def check_hhh_report(report: Sequence[tuple[Prefix, float]], f: Sequence[int], hierarchy: Hierarchy,
                     eps: float, gamma: float) -> list[str]:
    """Violations of accuracy and coverage for a report against exact frequencies."""
    m = sum(f)
    exact = prefix_frequencies(f, hierarchy)
    problems = []
    reported = [p for p, _ in report]
    for p, est in report:
        true = exact[p]
        if not true - eps * m - 1e-9 <= est <= true + 1e-9:
            problems.append(f"accuracy: {p} estimate {est} vs true {true}")
    reported_set = set(reported)
    for q in hierarchy.all_prefixes():
        if q in reported_set:
            continue
        r = residual_mass(q, reported, f, hierarchy)
        if r > gamma * m + 1e-9:
            problems.append(f"coverage: {q} residual {r} > {gamma * m}")
    return problems


def exact_hhh(f: Sequence[int], hierarchy: Hierarchy, eps: float) -> list[Prefix]:
    """The hierarchical heavy hitter sets HHH_0, HHH_1, ... by their inductive definition."""
    m = sum(f)
    chosen: list[Prefix] = []
    covered: set[int] = set()
    for lv in range(hierarchy.height + 1):
        level_hits = []
        for x in hierarchy.prefixes(lv):
            F = sum(count for leaf, count in enumerate(f, 1)
                    if hierarchy.ancestor(leaf, lv) == x and leaf not in covered)
            if F >= eps * m and F > 0:
                level_hits.append((lv, x))
        chosen.extend(level_hits)
        covered |= hierarchy.elements(level_hits)
    return chosen


# ---------------------------------------------------------------- sketches


@register
class DeterministicHHH(StreamAlgorithm):
    """One Misra-Gries per level with ceil(2h/eps) counters.

    A prefix q is reported when the upper bound on its residual mass,
    fhat_q + d_level - sum of fhat over its maximal reported descendants,
    exceeds gamma * m (checked bottom-up). Estimates are the MG lower
    counts, so f* - eps m <= fhat <= f*.
    """

    algorithm_id = "hhh"

    def __init__(self, hierarchy: Hierarchy, eps: float, gamma: float, counters: int | None = None,
                 levels: list[MisraGries] | None = None):
        if not 0 < eps <= gamma:
            raise ValueError("need 0 < eps <= gamma")
        self.hierarchy, self.eps, self.gamma = hierarchy, float(eps), float(gamma)
        h = max(1, hierarchy.height)
        self.k = counters or math.ceil(2 * h / self.eps - 1e-12)
        self.levels = levels or [MisraGries(self.k) for _ in range(hierarchy.height + 1)]
        self.m = 0

    def update(self, leaf: int) -> None:
        self.m += 1
        for mg, x in zip(self.levels, self.hierarchy.ancestors(leaf)):
            mg.update(x)

    def process(self, update, tape: RandomTape | None = None) -> None:
        self.update(update[0])

    def report(self, gamma: float | None = None, mass: float | None = None) -> list[tuple[Prefix, int]]:
        gamma = self.gamma if gamma is None else gamma
        cut = gamma * (self.m if mass is None else mass)
        out: list[tuple[Prefix, int]] = []
        frontier: list[tuple[int, int, int]] = []  # maximal reported prefixes: (level, id, estimate)
        for lv, mg in enumerate(self.levels):
            covered: dict[int, int] = {}
            for plv, x, est in frontier:
                a = self._lift(plv, x, lv)
                covered[a] = covered.get(a, 0) + est
            d = mg.decrements
            hits = [((lv, x), c) for x, c in sorted(mg.table.items()) if c + d - covered.get(x, 0) > cut]
            if hits:
                ids = {x for (_, x), _ in hits}
                frontier = [fr for fr in frontier if self._lift(fr[0], fr[1], lv) not in ids]
                frontier.extend((lv, x, c) for (_, x), c in hits)
                out.extend(hits)
        return out

    def _lift(self, level: int, x: int, target: int) -> int:
        for lv in range(level, target):
            x = self.hierarchy.parents[lv][x]
        return x

    answer = report

    def encode(self, enc: Encoder) -> None:
        self.hierarchy.encode(enc)
        enc.float64(self.eps).float64(self.gamma).uint(self.k).uint(self.m)
        for mg in self.levels:
            mg.encode(enc)

    @classmethod
    def decode(cls, dec: Decoder) -> "DeterministicHHH":
        hier = Hierarchy.decode(dec)
        eps, gamma, k, m = dec.float64(), dec.float64(), dec.uint(), dec.uint()
        levels = [MisraGries.decode(dec) for _ in range(hier.height + 1)]
        self = cls(hier, eps, gamma, k, levels)
        self.m = m
        return self

    def clone(self) -> "DeterministicHHH":
        other = DeterministicHHH(self.hierarchy, self.eps, self.gamma, self.k, [mg.clone() for mg in self.levels])
        other.m = self.m
        return other


def deterministic_hhh(stream: Iterable[int], hierarchy: Hierarchy, eps: float, gamma: float) -> list[tuple[Prefix, int]]:
    alg = DeterministicHHH(hierarchy, eps, gamma)
    for leaf in stream:
        alg.update(leaf)
    return alg.report()


@register
class BernHHH(StreamAlgorithm):
    """Bernoulli sampling into a deterministic HHH sketch at eps/2.

    The report applies gamma to the sampled mass and scales estimates by 1/p.
    """

    algorithm_id = "bernhhh"

    def __init__(self, hierarchy: Hierarchy, m_guess: float, eps: float, gamma: float, delta: float,
                 C: float = SAMPLING_CONSTANT, inner: DeterministicHHH | None = None):
        self.hierarchy = hierarchy
        self.m_guess, self.eps, self.gamma, self.delta, self.C = float(m_guess), float(eps), float(gamma), float(delta), float(C)
        self.p = sampling_rate(hierarchy.n, self.m_guess, self.eps, self.delta, self.C)
        self._threshold = probability_threshold(self.p)
        self.inner = inner or DeterministicHHH(hierarchy, self.eps / 2, max(self.gamma, self.eps / 2))

    def process(self, update, tape: RandomTape) -> None:
        thr = self._threshold
        if thr >= ONE or tape.word() < thr:
            self.inner.update(update[0])

    def report(self) -> list[tuple[Prefix, float]]:
        scale = 1 / self.p
        return [(p, c * scale) for p, c in self.inner.report(self.gamma)]

    answer = report

    def encode(self, enc: Encoder) -> None:
        enc.float64(self.m_guess).float64(self.eps).float64(self.gamma).float64(self.delta).float64(self.C)
        self.inner.encode(enc)

    @classmethod
    def decode(cls, dec: Decoder) -> "BernHHH":
        mg, eps, gamma, delta, C = (dec.float64() for _ in range(5))
        inner = DeterministicHHH.decode(dec)
        return cls(inner.hierarchy, mg, eps, gamma, delta, C, inner)

    def clone(self) -> "BernHHH":
        other = object.__new__(BernHHH)
        other.__dict__.update(self.__dict__)
        other.inner = self.inner.clone()
        return other


@register
class RobustHHH(StreamAlgorithm):
    """Same guess-rollover scheme as RobustHeavyHitters, with BernHHH instances."""

    algorithm_id = "robust_hhh"

    def __init__(self, hierarchy: Hierarchy, eps: float, gamma: float | None = None, m_cap: int = DEFAULT_M_CAP,
                 C: float = SAMPLING_CONSTANT, morris_delta: float = 1 / 16, _fresh: bool = True):
        self.hierarchy = hierarchy
        self.eps = float(eps)
        self.gamma = float(gamma if gamma is not None else eps)
        self.m_cap, self.C, self.morris_delta = m_cap, float(C), float(morris_delta)
        self.ratio = 16 / self.eps
        self.delta = self.eps / (4 * math.log2(m_cap))
        if _fresh:
            self.morris = MorrisCounter.from_accuracy(self.eps, self.morris_delta)
            self.c = 1
            self.instances = [self._instance(1), self._instance(2)]
            self._set_cut()

    def _instance(self, i: int) -> BernHHH:
        return BernHHH(self.hierarchy, self.ratio ** i, self.eps / 2, self.gamma, self.delta, self.C)

    def _set_cut(self) -> None:
        m = self.morris
        lb = math.log1p(m.a)

        def level(target, strict=False):
            x = max(0, math.floor(math.log1p(target * m.a) / lb) - 2)
            while (m.copy_estimate(x) <= target) if strict else (m.copy_estimate(x) < target):
                x += 1
            return x

        self._roll_level = level(self.ratio ** self.c)
        self._cap_level = level(self.m_cap, strict=True)

    def process(self, update, tape: RandomTape) -> None:
        self.morris.increment(tape)
        for inst in self.instances:
            inst.process(update, tape)
        level = self.morris.median_level()
        if level >= self._cap_level:
            raise MCapExceeded(f"stream length estimate exceeds m_cap={self.m_cap}")
        if level >= self._roll_level:
            self.c += 1
            self.instances = [self.instances[1], self._instance(self.c + 1)]
            self._set_cut()

    @property
    def reporter(self) -> BernHHH:
        return self.instances[0]

    def report(self) -> list[tuple[Prefix, float]]:
        return self.reporter.report()

    answer = report

    def encode(self, enc: Encoder) -> None:
        self.hierarchy.encode(enc)
        enc.float64(self.eps).float64(self.gamma).uint(self.m_cap).float64(self.C).float64(self.morris_delta)
        enc.uint(self.c)
        self.morris.encode(enc)
        for inst in self.instances:
            inst.inner.encode(enc)

    @classmethod
    def decode(cls, dec: Decoder) -> "RobustHHH":
        hier = Hierarchy.decode(dec)
        eps, gamma, m_cap, C, md = dec.float64(), dec.float64(), dec.uint(), dec.float64(), dec.float64()
        self = cls(hier, eps, gamma, m_cap, C, md, _fresh=False)
        self.c = dec.uint()
        self.morris = MorrisCounter.decode(dec)
        self.instances = []
        for i in (self.c, self.c + 1):
            inst = self._instance(i)
            inst.inner = DeterministicHHH.decode(dec)
            self.instances.append(inst)
        self._set_cut()
        return self

    def clone(self) -> "RobustHHH":
        other = object.__new__(RobustHHH)
        other.__dict__.update(self.__dict__)
        other.morris = self.morris.clone()
        other.instances = [inst.clone() for inst in self.instances]
        return other
