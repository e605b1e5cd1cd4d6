"""Interval families of leveled automata that try to count ones.

A leveled automaton reads one symbol per level. For every node u we track
C_u, the set of counter values chi(sigma) over inputs sigma reaching u, and
summarize it by the interval J_u = [min C_u, max C_u]. I(t) keeps the
inclusion-maximal intervals at level t. The checkers here test the
structural facts every such family obeys, and the exceptional-count
argument that turns a small error bound into many intervals.
"""
from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

Interval = tuple[int, int]


class LeveledAutomaton:
    """transitions[t - 1][state][symbol] is the level-(t+1) state reached from level t."""

    def __init__(self, width: int, transitions: Sequence[Sequence[Sequence[int]]], start: int = 0,
                 alphabet: int = 2):
        if width < 1:
            raise ValueError("width must be positive")
        if not 0 <= start < width:
            raise ValueError("start state outside the width")
        for t, table in enumerate(transitions, 1):
            if len(table) != width or any(len(row) != alphabet for row in table):
                raise ValueError(f"level {t}: transition table must be {width} x {alphabet}")
            if any(not 0 <= s < width for row in table for s in row):
                raise ValueError(f"level {t}: target state outside the width")
        self.width, self.start, self.alphabet = width, start, alphabet
        self.transitions = [tuple(tuple(row) for row in table) for table in transitions]

    @property
    def horizon(self) -> int:
        return len(self.transitions)

    def step(self, t: int, state: int, symbol: int) -> int:
        return self.transitions[t - 1][state][symbol]

    def run(self, symbols: Iterable[int]) -> int:
        s = self.start
        for t, a in enumerate(symbols, 1):
            s = self.step(t, s, a)
        return s

    @classmethod
    def level_uniform(cls, width: int, table: Sequence[Sequence[int]], horizon: int, **kw) -> "LeveledAutomaton":
        return cls(width, [table] * horizon, **kw)

    @classmethod
    def random(cls, width: int, horizon: int, rng: random.Random, alphabet: int = 2) -> "LeveledAutomaton":
        return cls(width, [[[rng.randrange(width) for _ in range(alphabet)] for _ in range(width)]
                           for _ in range(horizon)], alphabet=alphabet)

    @classmethod
    def exact_counter(cls, horizon: int) -> "LeveledAutomaton":
        """State = number of ones so far; width horizon + 1."""
        w = horizon + 1
        table = [[s, min(s + 1, w - 1)] for s in range(w)]
        return cls.level_uniform(w, table, horizon)

    @classmethod
    def constant(cls, horizon: int) -> "LeveledAutomaton":
        return cls.level_uniform(1, [[0, 0]], horizon)

    def __repr__(self) -> str:
        return f"LeveledAutomaton(width={self.width}, horizon={self.horizon})"


class MonotonicCounterSpec:
    """chi(empty) = 1 and, at every step, some symbol adds 0 and some symbol adds 1.

    The increment may depend on the time step and the symbol, which keeps
    C_u computable level by level.
    """

    def __init__(self, increment: Callable[[int, int], int] | None = None, alphabet: int = 2):
        self.alphabet = alphabet
        self._increment = increment or (lambda t, a: 1 if a == 1 else 0)

    def increment(self, t: int, symbol: int) -> int:
        return self._increment(t, symbol)

    def validate(self, horizon: int) -> None:
        for t in range(1, horizon + 1):
            incs = {self.increment(t, a) for a in range(self.alphabet)}
            if incs != {0, 1}:
                raise ValueError(f"step {t}: increments {sorted(incs)} are not exactly {{0, 1}}")

    def value(self, symbols: Iterable[int]) -> int:
        return 1 + sum(self.increment(t, a) for t, a in enumerate(symbols, 1))


ONES_COUNTER = MonotonicCounterSpec()


def maximal_intervals(intervals: Iterable[Interval]) -> tuple[Interval, ...]:
    """Inclusion-maximal members, sorted by left endpoint."""
    uniq = sorted(set(intervals), key=lambda iv: (iv[0], -iv[1]))
    out: list[Interval] = []
    best_right = None
    for k, l in uniq:
        if best_right is not None and l <= best_right:
            continue  # contained in an earlier interval with smaller-or-equal left end
        out.append((k, l))
        best_right = l
    return tuple(out)


@dataclass
class IntervalFamily:
    """levels[t] = I(t) for t = 1 .. horizon + 1 (index 0 unused)."""

    levels: list[tuple[Interval, ...]]
    nodes: list[dict[int, Interval]] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.levels) - 2

    def __getitem__(self, t: int) -> tuple[Interval, ...]:
        return self.levels[t]

    def sizes(self) -> list[int]:
        return [len(self.levels[t]) for t in range(1, len(self.levels))]

    def present(self, k: int, t: int) -> bool:
        return any(a == k for a, _ in self.levels[t])

    def exceptional(self, k: int, t: int) -> bool:
        return self.present(k, t) and not self.present(k + 1, t + 1)


def compute_interval_family(automaton: LeveledAutomaton, counter: MonotonicCounterSpec = ONES_COUNTER,
                            horizon: int | None = None) -> IntervalFamily:
    """Level-synchronous propagation of (min, max) of C_u; exact for the endpoints."""
    n = automaton.horizon if horizon is None else horizon
    if n > automaton.horizon:
        raise ValueError("horizon exceeds the automaton's levels")
    counter.validate(n)
    cur: dict[int, Interval] = {automaton.start: (1, 1)}
    nodes = [{}, cur]
    for t in range(1, n + 1):
        nxt: dict[int, Interval] = {}
        for u, (lo, hi) in cur.items():
            for a in range(automaton.alphabet):
                v = automaton.step(t, u, a)
                inc = counter.increment(t, a)
                if v in nxt:
                    plo, phi = nxt[v]
                    nxt[v] = (min(plo, lo + inc), max(phi, hi + inc))
                else:
                    nxt[v] = (lo + inc, hi + inc)
        cur = nxt
        nodes.append(cur)
    levels = [()] + [maximal_intervals(level.values()) for level in nodes[1:]]
    return IntervalFamily(levels, nodes)


def exact_counter_sets(automaton: LeveledAutomaton, counter: MonotonicCounterSpec = ONES_COUNTER,
                       horizon: int | None = None) -> list[dict[int, frozenset[int]]]:
    """C_u for every node by enumerating every input string; horizon <= 16."""
    n = automaton.horizon if horizon is None else horizon
    if n > 16:
        raise ValueError("exact enumeration is limited to horizon 16")
    out: list[dict[int, frozenset[int]]] = [{}]
    frontier = [(automaton.start, 1)]  # one entry per input string so far
    for t in range(1, n + 2):
        level: dict[int, set[int]] = {}
        for u, chi in frontier:
            level.setdefault(u, set()).add(chi)
        out.append({u: frozenset(c) for u, c in level.items()})
        if t == n + 1:
            break
        frontier = [(automaton.step(t, u, a), chi + counter.increment(t, a))
                    for u, chi in frontier for a in range(automaton.alphabet)]
    return out


def family_from_sets(sets: Sequence[dict[int, frozenset[int]]]) -> IntervalFamily:
    nodes = [{}] + [{u: (min(c), max(c)) for u, c in level.items()} for level in sets[1:]]
    return IntervalFamily([()] + [maximal_intervals(level.values()) for level in nodes[1:]], nodes)


# ---------------------------------------------------------------- checkers


@dataclass(frozen=True)
class Violation:
    lemma: str
    t: int
    detail: str


def _covers(outer: Interval, inner: Interval) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def check_structural_lemmas(family: IntervalFamily) -> list[Violation]:
    """Checks I(1) = {[1,1]}, persistence (a), the shifted successor (b),
    that 1 is always present and that each I(t) is inclusion-maximal."""
    out: list[Violation] = []
    last = len(family.levels) - 1
    if tuple(family[1]) != ((1, 1),):
        out.append(Violation("basic-props(0)", 1, f"I(1) = {list(family[1])}"))
    for t in range(1, last + 1):
        level = family[t]
        for a, b in itertools.permutations(level, 2):
            if _covers(a, b):
                out.append(Violation("maximal", t, f"{b} inside {a}"))
        if not family.present(1, t):
            out.append(Violation("one-present", t, "no interval starts at 1"))
        for iv in level:
            # (a) holds for every later level once it holds one step ahead, but check all
            for t2 in range(t + 1, last + 1):
                if not any(_covers(J, iv) for J in family[t2]):
                    out.append(Violation("basic-props(a)", t, f"{iv} not covered at t'={t2}"))
                    break
            if t < last:
                shifted = (iv[0] + 1, iv[1] + 1)
                if not any(_covers(J, shifted) for J in family[t + 1]):
                    out.append(Violation("basic-props(b)", t, f"{shifted} not covered at t+1"))
    return out


def error_function(form: str, delta: float, n: int) -> Callable[[int], float]:
    """The three error shapes: mult (delta k), poly-mult ((n^delta - 1) k), additive (n^delta)."""
    if form == "mult":
        return lambda k: delta * k
    if form == "poly-mult":
        f = n ** delta - 1
        return lambda k: f * k
    if form == "additive":
        a = n ** delta
        return lambda k: a
    raise ValueError(f"unknown error form {form!r}")


def is_eps_bound(interval: Interval, eps: Callable[[int], float]) -> bool:
    lo, hi = interval
    return all(hi - k <= eps(k) + 1e-12 for k in range(lo, hi + 1))


def level_eps_bound(family: IntervalFamily, t: int, eps: Callable[[int], float]) -> bool:
    return all(is_eps_bound(iv, eps) for iv in family[t])


def theoretical_h(eps: Callable[[int], float], n: int) -> int:
    """Largest h with (1 + sum_{k<=h} eps(k)) * h <= n (0 if none)."""
    h, total = 0, 0.0
    for cand in range(1, n + 1):
        total += eps(cand)
        if (1 + total) * cand <= n + 1e-9:
            h = cand
        else:
            break
    return h


@dataclass
class ExceptionalReport:
    phi: list[int]  # phi[h] for h = 0 .. n
    h_star: int
    t0: int | None
    max_intervals: int
    lower_bound_holds: bool
    excep_violations: list[Violation]
    theoretical_h: int
    final_eps_bound: bool

    @property
    def ok(self) -> bool:
        return self.lower_bound_holds and not self.excep_violations


def exceptional_analysis(family: IntervalFamily, eps: Callable[[int], float] | None = None,
                         horizon: int | None = None) -> ExceptionalReport:
    n = family.horizon if horizon is None else horizon
    exc_times: dict[int, list[int]] = {}
    first_k_at: list[int | None] = [None] * (n + 1)  # smallest exceptional count at time t
    for t in range(1, n + 1):
        for k, _ in family[t]:
            if family.exceptional(k, t):
                exc_times.setdefault(k, []).append(t)
                if first_k_at[t] is None or k < first_k_at[t]:
                    first_k_at[t] = k
    phi = [0] * (n + 1)
    for h in range(1, n + 1):
        phi[h] = sum(1 for t in range(1, n + 1) if first_k_at[t] is not None and first_k_at[t] <= h)
    h_star = max((h for h in range(1, n + 1) if (phi[h] + 1) * h <= n), default=0)
    sizes = {t: len(family[t]) for t in range(1, n + 2)}
    t0 = next((t for t in range(1, n + 2) if sizes[t] >= h_star + 1), None)
    violations = []
    for k, times in exc_times.items():
        need = k + len(times)
        for t in range(max(times) + 1, n + 2):
            if not any(a <= k <= b and b >= need for a, b in family[t]):
                violations.append(Violation("excep", t, f"count {k} exceptional {len(times)} times, "
                                                        f"no interval through {k} reaching {need}"))
                break
    th = theoretical_h(eps, n) if eps is not None else 0
    final_ok = level_eps_bound(family, n + 1, eps) if eps is not None else True
    return ExceptionalReport(phi, h_star, t0, max(sizes.values()), t0 is not None, violations, th, final_ok)


# ---------------------------------------------------------------- search


@dataclass
class SearchResult:
    width: int
    horizon: int
    examined: int
    approximating: list[LeveledAutomaton]
    exhaustive: bool
    max_intervals: int
    lemma_violations: int

    @property
    def found(self) -> int:
        return len(self.approximating)


def _examine(aut: LeveledAutomaton, eps, counter, n, result: SearchResult, check: bool) -> None:
    fam = compute_interval_family(aut, counter, n)
    result.examined += 1
    result.max_intervals = max(result.max_intervals, max(fam.sizes()))
    if check:
        result.lemma_violations += len(check_structural_lemmas(fam))
    if level_eps_bound(fam, n + 1, eps):
        result.approximating.append(aut)


def level_uniform_tables(width: int, alphabet: int = 2):
    cells = width * alphabet
    for flat in itertools.product(range(width), repeat=cells):
        yield [list(flat[s * alphabet:(s + 1) * alphabet]) for s in range(width)]


def exhaustive_search(width: int, horizon: int, eps: Callable[[int], float],
                      counter: MonotonicCounterSpec = ONES_COUNTER, check: bool = False) -> SearchResult:
    """Every level-uniform automaton of the given width (start state 0).

    An automaton counts as approximating when every interval of I(horizon+1)
    is eps-bound, the weakest requirement the lower-bound argument uses.
    """
    if width ** (2 * width) > 10 ** 6:
        raise ValueError("table space too large for exhaustive search; use random_search")
    res = SearchResult(width, horizon, 0, [], True, 0, 0)
    for table in level_uniform_tables(width):
        _examine(LeveledAutomaton.level_uniform(width, table, horizon), eps, counter, horizon, res, check)
    return res


def random_search(width: int, horizon: int, eps: Callable[[int], float], trials: int, seed: int = 0,
                  counter: MonotonicCounterSpec = ONES_COUNTER, check: bool = False) -> SearchResult:
    rng = random.Random(seed)
    res = SearchResult(width, horizon, 0, [], False, 0, 0)
    for _ in range(trials):
        table = [[rng.randrange(width) for _ in range(2)] for _ in range(width)]
        _examine(LeveledAutomaton.level_uniform(width, table, horizon), eps, counter, horizon, res, check)
    return res


def corrupt_family(family: IntervalFamily, t: int) -> IntervalFamily:
    """Drop the interval starting at 1 from I(t), which breaks one-present and (a)."""
    levels = list(family.levels)
    levels[t] = tuple(iv for iv in levels[t] if iv[0] != 1) or ((2, 2),)
    return IntervalFamily(levels, family.nodes)


def log2_width_needed(intervals: int) -> float:
    return math.log2(max(1, intervals))
