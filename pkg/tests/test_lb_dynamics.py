import random

import pytest
from hypothesis import given, settings, strategies as st

from wbstream.lb_dynamics import (
    ONES_COUNTER,
    IntervalFamily,
    LeveledAutomaton,
    MonotonicCounterSpec,
    check_structural_lemmas,
    compute_interval_family,
    corrupt_family,
    error_function,
    exact_counter_sets,
    exceptional_analysis,
    exhaustive_search,
    family_from_sets,
    is_eps_bound,
    level_uniform_tables,
    log2_width_needed,
    maximal_intervals,
    random_search,
    theoretical_h,
)


def test_first_level_is_one():
    rng = random.Random(0)
    for _ in range(20):
        fam = compute_interval_family(LeveledAutomaton.random(3, 5, rng))
        assert fam[1] == ((1, 1),)


def test_exact_counter_family():
    n = 10
    fam = compute_interval_family(LeveledAutomaton.exact_counter(n))
    for t in range(1, n + 2):
        assert fam[t] == tuple((k, k) for k in range(1, t + 1))
    assert check_structural_lemmas(fam) == []
    report = exceptional_analysis(fam, error_function("mult", 0.5, n))
    assert report.phi == [0] * (n + 1)
    assert report.ok and report.max_intervals == n + 1


def test_constant_automaton_family():
    fam = compute_interval_family(LeveledAutomaton.constant(8))
    assert [fam[t] for t in range(1, 10)] == [((1, t),) for t in range(1, 10)]
    assert check_structural_lemmas(fam) == []


def test_maximal_intervals():
    assert maximal_intervals([(1, 3), (2, 3), (1, 1), (4, 5), (4, 4), (2, 6)]) == ((1, 3), (2, 6))
    assert maximal_intervals([(2, 2), (2, 2)]) == ((2, 2),)


def test_random_automata_satisfy_lemmas():
    rng = random.Random(1)
    for _ in range(200):
        aut = LeveledAutomaton.random(rng.randint(1, 5), rng.randint(1, 12), rng)
        fam = compute_interval_family(aut)
        assert check_structural_lemmas(fam) == []
        assert max(fam.sizes()) <= aut.width
        assert exceptional_analysis(fam).excep_violations == []


@given(st.integers(1, 4), st.integers(1, 10), st.integers(0, 2 ** 32))
@settings(max_examples=80, deadline=None)
def test_dp_matches_exact_enumeration(width, horizon, seed):
    aut = LeveledAutomaton.random(width, horizon, random.Random(seed))
    dp = compute_interval_family(aut)
    exact = family_from_sets(exact_counter_sets(aut))
    assert dp.levels == exact.levels


def test_custom_counter():
    # the roles of the symbols swap on even steps
    flip = MonotonicCounterSpec(lambda t, a: a if t % 2 else 1 - a)
    aut = LeveledAutomaton.random(3, 8, random.Random(2))
    dp = compute_interval_family(aut, flip)
    assert dp.levels == family_from_sets(exact_counter_sets(aut, flip)).levels
    assert check_structural_lemmas(dp) == []
    with pytest.raises(ValueError):
        MonotonicCounterSpec(lambda t, a: 2 * a).validate(3)


def test_corrupted_family_is_caught():
    fam = compute_interval_family(LeveledAutomaton.exact_counter(6))
    bad = corrupt_family(fam, 4)
    lemmas = {v.lemma for v in check_structural_lemmas(bad)}
    assert "one-present" in lemmas


def test_swapped_first_level_is_caught():
    fam = compute_interval_family(LeveledAutomaton.constant(3))
    bad = IntervalFamily([(), ((1, 2),)] + list(fam.levels[2:]))
    assert any(v.lemma == "basic-props(0)" for v in check_structural_lemmas(bad))


def test_theoretical_h_at_27():
    assert theoretical_h(lambda k: k, 27) == 3
    assert theoretical_h(error_function("mult", 1.0, 27), 27) == 3


def test_error_forms():
    assert error_function("mult", 0.1, 64)(10) == pytest.approx(1.0)
    assert error_function("poly-mult", 0.5, 16)(2) == pytest.approx(6.0)
    assert error_function("additive", 0.5, 16)(99) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        error_function("log", 0.5, 16)
    assert is_eps_bound((10, 11), lambda k: 0.1 * k)
    assert not is_eps_bound((3, 5), lambda k: 0.1 * k)


def test_width_two_search_n12():
    eps = error_function("mult", 0.5, 12)
    res = exhaustive_search(2, 12, eps, check=True)
    assert res.examined == 16 and res.exhaustive
    assert res.lemma_violations == 0
    for aut in res.approximating:
        report = exceptional_analysis(compute_interval_family(aut), eps)
        assert report.lower_bound_holds
    assert res.found == 0


def test_width_two_search_n64():
    res = exhaustive_search(2, 64, error_function("mult", 0.1, 64))
    assert res.examined == 16 and res.found == 0


def test_exact_counter_is_approximating_but_wide():
    n = 12
    fam = compute_interval_family(LeveledAutomaton.exact_counter(n))
    eps = error_function("mult", 0.1, n)
    report = exceptional_analysis(fam, eps)
    assert report.final_eps_bound and report.lower_bound_holds
    assert log2_width_needed(report.max_intervals) == pytest.approx(3.7004, abs=1e-4)


def test_random_search_reports_non_exhaustive():
    res = random_search(4, 16, error_function("mult", 0.1, 16), trials=50, seed=3)
    assert not res.exhaustive and res.examined == 50 and res.found == 0


def test_table_enumeration_and_limits():
    assert sum(1 for _ in level_uniform_tables(2)) == 16
    with pytest.raises(ValueError):
        exhaustive_search(6, 8, error_function("mult", 0.1, 8))
    with pytest.raises(ValueError):
        exact_counter_sets(LeveledAutomaton.constant(17))
    with pytest.raises(ValueError):
        LeveledAutomaton(2, [[[0, 2], [0, 1]]])


def test_run_and_counter_value():
    aut = LeveledAutomaton.exact_counter(5)
    assert aut.run([1, 0, 1, 1, 0]) == 3
    assert ONES_COUNTER.value([1, 0, 1]) == 3
