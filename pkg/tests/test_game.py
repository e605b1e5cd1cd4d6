import random

import pytest

from wbstream.crypto_prims import DlFingerprinter
from wbstream.experiments import ExperimentConfig, run_experiment
from wbstream.game import Adversary, BudgetExhausted, OpCounter, Outcome, monte_carlo_failure_rate, run_game
from wbstream.game.adversaries import (
    FermatAdversary,
    ObliviousAdversary,
    SignCancellationAdversary,
    SmallestCounterAdversary,
    fermat_karp_rabin_adversary,
)
from wbstream.game.harness import QueryContract, derive_seed
from wbstream.game.targets import (
    AmsSketch,
    KarpRabinTester,
    equality_contract,
    f2_contract,
    heavy_item_contract,
    karp_rabin_fingerprint,
)
from wbstream.heavy_hitters import MisraGries
from wbstream.pattern_matching import SymbolUpdate, stream_equal
from wbstream.stream_core import StreamUpdate, UniverseParams

PARAMS = UniverseParams(8, max_magnitude=10 ** 6)


def observe(schedule="every"):
    # records answers without judging them
    return QueryContract("observe", truth=lambda o: o.m, check=lambda t, a: True, schedule=schedule)


def test_oblivious_game_equals_direct_run():
    rng = random.Random(0)
    updates = [StreamUpdate(rng.randint(1, 8)) for _ in range(120)]
    tr = run_game(MisraGries(3), ObliviousAdversary(updates), observe(), 500, seed=1, params=PARAMS)
    direct, answers = MisraGries(3), []
    for u in updates:
        direct.process(u)
        answers.append(direct.report())
    assert [r.answer for r in tr.rounds] == answers
    assert len(tr.rounds) == len(updates)


def test_past_states_replay_exactly():
    rng = random.Random(1)
    updates = [StreamUpdate(rng.randint(1, 8)) for _ in range(60)]
    tr = run_game(MisraGries(2), ObliviousAdversary(updates), observe(), 100, seed=2, params=PARAMS)
    direct = MisraGries(2)
    for rec, u in zip(tr.rounds, updates):
        direct.process(u)
        assert rec.state.state_bytes == direct.to_bytes()


def test_fermat_pair_small_prime():
    adv = fermat_karp_rabin_adversary(7, x=3, i=1)
    plan = adv.plan(7)
    u = [s.symbol for s in plan if s.track == 0]
    v = [s.symbol for s in plan if s.track == 1]
    assert len(u) == len(v) == 8
    assert u.index(1) + 1 == 1 and v.index(1) + 1 == 7
    assert karp_rabin_fingerprint(u, 7, 3) == karp_rabin_fingerprint(v, 7, 3) == 3
    assert u != v
    assert not stream_equal(u, v).equal
    dl = DlFingerprinter()
    assert dl.fingerprint(u) != dl.fingerprint(v)


def test_fermat_rejects_composite():
    with pytest.raises(ValueError):
        FermatAdversary(9)


def test_karp_rabin_equal_strings():
    t = KarpRabinTester(7, 3)
    for track in (0, 1):
        for b in (1, 0, 1, 1):
            t.process(SymbolUpdate(track, b))
    assert t.answer()


def test_fermat_attack_breaks_karp_rabin():
    tr = run_game(KarpRabinTester(), FermatAdversary(), equality_contract(), 2 * (4097 + 1), seed=3)
    assert tr.outcome is Outcome.FAILED
    assert tr.rounds[tr.failed_at - 1].answer is True


def test_fermat_black_box_rarely_wins():
    rate = monte_carlo_failure_rate(KarpRabinTester, lambda: FermatAdversary(), equality_contract(),
                                    trials=40, max_rounds=2 * 4098, seed=4, white_box=False)
    assert rate <= 0.05


def test_sign_cancellation_breaks_ams():
    n, r = 32, 16
    params = UniverseParams(n)
    rate = monte_carlo_failure_rate(lambda: AmsSketch(n, r), lambda: SignCancellationAdversary(n),
                                    f2_contract(params), trials=10, max_rounds=n, seed=5, params=params)
    assert rate == 1.0


def test_sign_cancellation_black_box_fails():
    n, r = 128, 128
    params = UniverseParams(n)
    rate = monte_carlo_failure_rate(lambda: AmsSketch(n, r), lambda: SignCancellationAdversary(n, shape=(n, r)),
                                    f2_contract(params), trials=20, max_rounds=n, seed=6, params=params,
                                    white_box=False)
    assert rate <= 0.05


def test_misra_gries_never_fails():
    for adv in (lambda: SmallestCounterAdversary(8, 1, 300, 600), lambda: ObliviousAdversary([(1, 1)] * 50)):
        rate = monte_carlo_failure_rate(lambda: MisraGries(4), adv, heavy_item_contract(1), trials=10,
                                        max_rounds=1000, seed=7, params=PARAMS)
        assert rate == 0.0


@pytest.mark.slow
def test_robust_hh_adaptive_failure_rate():
    cfg = ExperimentConfig("robust", "adaptive", {"epsilon": 0.1, "m": 3000, "universe": 64}, trials=500, seed=8)
    assert run_experiment(cfg)["failure_rate"] <= 0.3


def test_black_box_view_hides_state():
    seen = {}

    class Peek(Adversary):
        def next_update(self, view):
            if view.round == 0:
                seen["answer"] = view.state.answer
                with pytest.raises(PermissionError):
                    view.state.algorithm
                return StreamUpdate(1)
            return None

    run_game(MisraGries(2), Peek(), observe(), 5, seed=0, params=PARAMS, white_box=False)
    assert seen["answer"] == []


def test_white_box_snapshot_is_a_copy():
    class Tamper(Adversary):
        def next_update(self, view):
            if view.round >= 3:
                return None
            view.state.algorithm.table[99] = 1000
            return StreamUpdate(2)

    tr = run_game(MisraGries(2), Tamper(), observe("final"), 10, seed=0, params=PARAMS)
    assert tr.rounds[-1].answer == [(2, 3)]
    assert tr.rounds[0].state.algorithm.report() == [(2, 1)]


def test_invalid_update_is_an_adversary_fault():
    tr = run_game(MisraGries(2), ObliviousAdversary([(1, 1), (99, 1), (2, 1)]), observe(), 10,
                  seed=0, params=PARAMS)
    assert [r.fault is not None for r in tr.rounds] == [False, True, False]
    assert len(tr.processed_rounds()) == 2


def test_budget_exhaustion_forces_default_update():
    class Spender(Adversary):
        time_budget = 10

        def next_update(self, view):
            view.ops.charge(4)
            return StreamUpdate(5)

    tr = run_game(MisraGries(2), Spender(), observe(), 6, seed=0, params=PARAMS)
    assert [r.update for r in tr.rounds][:2] == [(5, 1), (5, 1)]
    assert all(r.forced and r.update == (1, 1) for r in tr.rounds[2:])


def test_op_counter():
    ops = OpCounter(5)
    assert ops.mul(3, 4, 5) == 2 and ops.add(3, 4) == 7
    with pytest.raises(BudgetExhausted):
        ops.pow(2, 2 ** 10, 7)


def test_transcript_replay_is_byte_identical():
    def play():
        return run_game(MisraGries(3), SmallestCounterAdversary(8, 2, 100, 200), heavy_item_contract(2, "every"),
                        400, seed=11, params=PARAMS).to_jsonl()

    assert play() == play()


def test_derive_seed_is_stable():
    assert derive_seed(0, "trial", 1) == derive_seed(0, "trial", 1) != derive_seed(0, "trial", 2)
    assert 0 <= derive_seed(5) < 2 ** 64


def test_max_rounds_validated():
    with pytest.raises(ValueError):
        run_game(MisraGries(1), ObliviousAdversary([]), observe(), 0, seed=0, params=PARAMS)
