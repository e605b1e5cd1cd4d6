"""The white-box game: adversary update, algorithm step, full disclosure.

A round t runs in this order:

1. the adversary picks u_t from everything disclosed so far;
2. the algorithm ingests u_t, drawing R_t from its tape;
3. the adversary is shown A_t, D_t and R_t.

D_0 and R_0 (the randomness drawn at initialization, if any) are shown
before round 1.
"""
from __future__ import annotations

import contextlib
import enum
import gc
import hashlib
import json
import random
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

from ..stream_core import (
    ExposedState,
    FrequencyOracle,
    RandomTape,
    StreamAlgorithm,
    StreamError,
    StreamUpdate,
    UniverseParams,
    state_size_bits,
)

DEFAULT_UPDATE = StreamUpdate(1, 1)


def derive_seed(master: int, *labels) -> int:
    """64-bit seed from SHA-256 over the master seed and labels (counter mode)."""
    h = hashlib.sha256(str(master).encode())
    for label in labels:
        h.update(b"/" + str(label).encode())
    return int.from_bytes(h.digest()[:8], "little")


class BudgetExhausted(Exception):
    pass


class OpCounter:
    """Instrumented arithmetic for time-bounded adversaries."""

    def __init__(self, budget: int | None = None):
        self.budget = budget
        self.used = 0

    @property
    def exhausted(self) -> bool:
        return self.budget is not None and self.used >= self.budget

    def charge(self, k: int = 1) -> None:
        self.used += k
        if self.budget is not None and self.used > self.budget:
            raise BudgetExhausted(f"adversary used {self.used} > {self.budget} operations")

    def add(self, a: int, b: int, mod: int | None = None) -> int:
        self.charge(1)
        return (a + b) % mod if mod else a + b

    def mul(self, a: int, b: int, mod: int | None = None) -> int:
        self.charge(1)
        return a * b % mod if mod else a * b

    def pow(self, base: int, exp: int, mod: int) -> int:
        # square-and-multiply: about two multiplications per exponent bit
        self.charge(max(1, 2 * exp.bit_length()))
        return pow(base, exp, mod)


class Outcome(enum.Enum):
    SURVIVED = "algorithm_survived"
    FAILED = "algorithm_failed"


@dataclass
class QueryContract:
    """Per-query correctness predicate plus the oracle that supplies truth.

    schedule is "every" (check each round) or "final" (check the last
    processed round only).
    """

    name: str
    truth: Callable[[Any], Any]
    check: Callable[[Any, Any], bool]
    schedule: str = "every"
    oracle_factory: Callable[[], Any] | None = None

    def make_oracle(self, params: UniverseParams | None):
        if self.oracle_factory is not None:
            return self.oracle_factory()
        if params is None:
            raise ValueError(f"contract {self.name!r} needs UniverseParams for the frequency oracle")
        return FrequencyOracle(params)


class HiddenState:
    """What a black-box adversary gets for a round: the answer only."""

    __slots__ = ("_state",)

    def __init__(self, state: ExposedState):
        self._state = state

    @property
    def round(self) -> int:
        return self._state.round

    @property
    def answer(self):
        return self._state.answer

    def __getattr__(self, name):
        raise PermissionError(f"black-box adversary cannot read {name!r}")


class AdversaryView:
    """Everything the adversary may consult when choosing the next update."""

    def __init__(self, white_box: bool, rng: random.Random, ops: OpCounter):
        self.white_box = white_box
        self.rng = rng
        self.ops = ops
        self.updates: list = []
        self._states: list[ExposedState] = []

    @property
    def round(self) -> int:
        return len(self._states) - 1

    @property
    def states(self) -> Sequence:
        if self.white_box:
            return self._states
        return [HiddenState(s) for s in self._states]

    @property
    def state(self):
        s = self._states[-1]
        return s if self.white_box else HiddenState(s)

    @property
    def answers(self) -> list:
        return [s.answer for s in self._states]


class Adversary:
    """Base adversary. Return None from next_update to stop the game."""

    time_budget: int | None = None

    def next_update(self, view: AdversaryView):
        raise NotImplementedError


@dataclass
class RoundRecord:
    round: int
    update: Any
    state: ExposedState | None
    truth: Any = None
    answer: Any = None
    correct: bool | None = None
    fault: str | None = None
    forced: bool = False


@dataclass
class GameTranscript:
    algorithm_id: str
    seed: int
    white_box: bool
    initial: ExposedState
    rounds: list[RoundRecord] = field(default_factory=list)
    failed_at: int | None = None

    @property
    def outcome(self) -> Outcome:
        return Outcome.FAILED if self.failed_at is not None else Outcome.SURVIVED

    @property
    def failed(self) -> bool:
        return self.failed_at is not None

    @property
    def final_state(self) -> ExposedState:
        for rec in reversed(self.rounds):
            if rec.state is not None:
                return rec.state
        return self.initial

    def processed_rounds(self) -> list[RoundRecord]:
        return [r for r in self.rounds if r.fault is None]

    def to_jsonl(self) -> str:
        lines = []
        for rec in self.rounds:
            lines.append(json.dumps({
                "round": rec.round,
                "update": to_jsonable(rec.update),
                "answer": to_jsonable(rec.answer),
                "correct": rec.correct,
                "state_bits": state_size_bits(rec.state) if rec.state is not None else None,
                **({"fault": rec.fault} if rec.fault else {}),
            }, sort_keys=True))
        return "\n".join(lines) + ("\n" if lines else "")


def to_jsonable(x):
    if isinstance(x, float):
        return x if x == x and x not in (float("inf"), float("-inf")) else str(x)
    if isinstance(x, (str, int, bool)) or x is None:
        return x
    if isinstance(x, enum.Enum):
        return x.value
    if isinstance(x, dict):
        return {str(k): to_jsonable(v) for k, v in x.items()}
    if hasattr(x, "_asdict"):
        return {k: to_jsonable(v) for k, v in x._asdict().items()}
    if isinstance(x, (list, tuple, set, frozenset)):
        items = sorted(x) if isinstance(x, (set, frozenset)) else x
        return [to_jsonable(v) for v in items]
    return repr(x)


class _Replayer:
    """Rebuilds the state after any past round from D_0, the tape seed and the updates."""

    def __init__(self, initial: StreamAlgorithm, seed: int, start_position: int, updates: list):
        self.initial = initial
        self.seed = seed
        self.start_position = start_position
        self.updates = updates

    def at(self, count: int) -> Callable[[], StreamAlgorithm]:
        def build():
            alg = self.initial.clone()
            tape = RandomTape(self.seed, self.start_position)
            for u in self.updates[:count]:
                alg.process(u, tape)
            return alg
        return build


@contextlib.contextmanager
def _gc_paused():
    # a game allocates one record per round and nothing cyclic; generational
    # collection over the growing transcript would dominate the run time
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was_enabled:
            gc.enable()


def run_game(algorithm: StreamAlgorithm, adversary: Adversary, contract: QueryContract, max_rounds: int,
             seed: int, params: UniverseParams | None = None, white_box: bool = True,
             record_truth: bool = False) -> GameTranscript:
    with _gc_paused():
        return _run_game(algorithm, adversary, contract, max_rounds, seed, params, white_box, record_truth)


def _run_game(algorithm, adversary, contract, max_rounds, seed, params, white_box, record_truth) -> GameTranscript:
    if max_rounds < 1:
        raise ValueError("max_rounds must be at least 1")
    tape = RandomTape(derive_seed(seed, "algorithm"))
    live = algorithm
    if hasattr(live, "initialize"):
        tape.start_round(0)
        live.initialize(tape)
        r0 = tape.end_round()
    else:
        r0 = ()
    initial_alg = live.clone()
    aid = live.algorithm_id
    d0 = ExposedState(aid, 0, r0, _snapshot=initial_alg.clone())
    ops = OpCounter(adversary.time_budget)
    view = AdversaryView(white_box, random.Random(derive_seed(seed, "adversary")), ops)
    view._states.append(d0)
    oracle = contract.make_oracle(params)
    replay = _Replayer(initial_alg, tape.seed, tape.position, view.updates)
    transcript = GameTranscript(aid, seed, white_box, d0)
    every = contract.schedule == "every"
    forced = False
    last = None

    for t in range(1, max_rounds + 1):
        if not forced:
            try:
                u = adversary.next_update(view)
            except BudgetExhausted:
                forced = True
        if forced:
            u = DEFAULT_UPDATE
        if u is None:
            break
        prev = view._states[-1]
        if prev._snapshot is None and prev._bytes is None:
            prev.materialize = replay.at(len(view.updates))
        elif prev._snapshot is not None and prev.round and prev is not d0:
            # drop cached copies of older rounds; replay restores them on demand
            prev._snapshot, prev.materialize = None, replay.at(len(view.updates))
        try:
            oracle.ingest(u)
        except (StreamError, ValueError, TypeError) as exc:
            transcript.rounds.append(RoundRecord(t, u, None, fault=str(exc), forced=forced))
            continue
        tape.start_round(t)
        live.process(u, tape)
        rt = tape.end_round()
        state = ExposedState(aid, t, rt, materialize=live.clone)
        view._states.append(state)
        view.updates.append(u)
        rec = RoundRecord(t, u, state, forced=forced)
        if every:
            rec.truth = contract.truth(oracle)
            rec.answer = state._answer = live.answer()
            state._answered = True
            rec.correct = bool(contract.check(rec.truth, rec.answer))
            if not rec.correct and transcript.failed_at is None:
                transcript.failed_at = t
        elif record_truth:
            rec.truth = contract.truth(oracle)
        transcript.rounds.append(rec)
        last = rec

    if not every and last is not None:
        last.truth = contract.truth(oracle)
        last.answer = live.answer()
        last.correct = bool(contract.check(last.truth, last.answer))
        if not last.correct:
            transcript.failed_at = last.round
    return transcript


@dataclass
class MonteCarloResult:
    trials: int
    failures: int
    state_bits: list[int]

    @property
    def failure_rate(self) -> float:
        return self.failures / self.trials

    @property
    def success_rate(self) -> float:
        return 1 - self.failure_rate


def monte_carlo(algorithm_factory: Callable[[], StreamAlgorithm], adversary_factory: Callable[[], Adversary],
                contract: QueryContract, trials: int, max_rounds: int, seed: int = 0,
                params: UniverseParams | None = None, white_box: bool = True) -> MonteCarloResult:
    if trials < 1:
        raise ValueError("trials must be at least 1")
    failures = 0
    bits = []
    for i in range(trials):
        tr = run_game(algorithm_factory(), adversary_factory(), contract, max_rounds,
                      derive_seed(seed, "trial", i), params, white_box)
        failures += tr.failed
        bits.append(state_size_bits(tr.final_state))
    return MonteCarloResult(trials, failures, bits)


def monte_carlo_failure_rate(algorithm_factory, adversary_factory, contract: QueryContract, trials: int,
                             max_rounds: int, seed: int = 0, params: UniverseParams | None = None,
                             white_box: bool = True) -> float:
    return monte_carlo(algorithm_factory, adversary_factory, contract, trials, max_rounds, seed,
                       params, white_box).failure_rate
