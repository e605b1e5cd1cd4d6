from .harness import (
    Adversary,
    AdversaryView,
    BudgetExhausted,
    GameTranscript,
    MonteCarloResult,
    OpCounter,
    Outcome,
    QueryContract,
    derive_seed,
    monte_carlo,
    monte_carlo_failure_rate,
    run_game,
)
