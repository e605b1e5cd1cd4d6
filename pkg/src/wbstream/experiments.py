"""Configured Monte Carlo runs of the white-box game and the attack demo."""
from __future__ import annotations

import statistics
import time
from dataclasses import dataclass, field
from typing import Any, Callable

from .approx_counting import MorrisCounter
from .crypto_prims import DlFingerprinter
from .game.adversaries import (
    CollisionSearchAdversary,
    FermatAdversary,
    ObliviousAdversary,
    PlantedStreamAdversary,
    SignCancellationAdversary,
    SmallestCounterAdversary,
    StoppingTimeAdversary,
)
from .game.harness import derive_seed, run_game, to_jsonable
from .game.targets import AmsSketch, KarpRabinTester, count_contract, equality_contract, f2_contract, heavy_item_contract
from .heavy_hitters import BernMG, CompressedHeavyHitters, MisraGries, RobustHeavyHitters
from .hierarchical_hh import BernHHH, DeterministicHHH, Hierarchy, RobustHHH
from .pattern_matching import StreamEqualityTester
from .stream_core import DEFAULT_M_CAP, StreamKind, UniverseParams, read_stream_file, state_size_bits


class ConfigError(ValueError):
    """Unknown algorithm or adversary, or a parameter that does not fit."""


@dataclass
class ExperimentConfig:
    algorithm: str
    adversary: str = "oblivious"
    params: dict[str, Any] = field(default_factory=dict)
    trials: int = 10
    seed: int = 0
    budget: int | None = None
    white_box: bool = True
    timing: bool = False

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "adversary": self.adversary,
            "params": dict(sorted(self.params.items())),
            "trials": self.trials,
            "seed": self.seed,
            "budget": self.budget,
            "white_box": self.white_box,
        }


@dataclass
class GameSetup:
    algorithm: Callable[[], Any]
    adversary: Callable[[], Any]
    contract: Any
    max_rounds: int
    params: UniverseParams | None = None


# ------------------------------------------------------------ builders


def _universe(n: int, m: int) -> UniverseParams:
    # small universes with long streams would trip the default n^3 frequency bound
    return UniverseParams(n, max_magnitude=max(n ** 3, m))


def _hh_setup(cfg: ExperimentConfig) -> GameSetup:
    p = cfg.params
    n = int(p.get("universe", 64))
    eps = float(p.get("epsilon", 0.25))
    phi = float(p.get("phi", eps))
    m = int(p.get("m", 30000))
    planted = int(p.get("planted", 1))
    frac = float(p.get("planted_fraction", 1 / 3))
    m_cap = int(p.get("m_cap", DEFAULT_M_CAP))
    if not 1 <= planted <= n:
        raise ConfigError("planted item must lie in the universe")
    pc = max(1, round(frac * m))
    dc = m - pc
    mode = cfg.algorithm
    if mode == "mg":
        alg = lambda: MisraGries.with_epsilon(eps)
    elif mode == "bernmg":
        alg = lambda: BernMG(n, float(p.get("m_guess", m)), eps, float(p.get("delta", 0.05)))
    elif mode == "robust":
        alg = lambda: RobustHeavyHitters(n, eps, m_cap)
    elif mode == "compressed":
        universe = p.get("hashed_universe")
        alg = lambda: CompressedHeavyHitters(n, phi, eps, universe=int(universe) if universe else None, m_cap=m_cap)
    else:
        raise ConfigError(f"unknown heavy-hitter mode {mode!r}")
    adv_name = cfg.adversary
    if adv_name == "oblivious":
        adv = lambda: PlantedStreamAdversary(n, planted, pc, dc)
    elif adv_name == "adaptive":
        if mode == "compressed":
            probe = alg()
            budget = cfg.budget or 10 ** 4
            adv = lambda: CollisionSearchAdversary(n, planted, pc, dc, probe.hash_bits, budget)
        else:
            adv = lambda: SmallestCounterAdversary(n, planted, pc, dc)
    elif adv_name == "file":
        path = p.get("stream_file")
        if not path:
            raise ConfigError("adversary 'file' needs stream_file")
        updates = read_stream_file(path)
        m = len(updates)
        adv = lambda: ObliviousAdversary(updates)
    else:
        raise ConfigError(f"unknown adversary {adv_name!r} for heavy hitters")
    return GameSetup(alg, adv, heavy_item_contract(planted), max(1, m), _universe(n, m))


def _hhh_setup(cfg: ExperimentConfig) -> GameSetup:
    p = cfg.params
    height, fanout = int(p.get("height", 3)), int(p.get("fanout", 2))
    n = fanout ** height
    hier = Hierarchy.with_fanout(n, fanout)
    eps = float(p.get("epsilon", 0.2))
    gamma = float(p.get("gamma", eps))
    m = int(p.get("m", 8000))
    planted = int(p.get("planted", 1))
    frac = float(p.get("planted_fraction", 0.5))
    pc = max(1, round(frac * m))
    mode = cfg.algorithm
    if mode == "hhh":
        alg = lambda: DeterministicHHH(hier, eps, gamma)
    elif mode == "bernhhh":
        alg = lambda: BernHHH(hier, float(p.get("m_guess", m)), eps, gamma, float(p.get("delta", 0.1)))
    elif mode == "robust_hhh":
        alg = lambda: RobustHHH(hier, eps, gamma, int(p.get("m_cap", DEFAULT_M_CAP)))
    else:
        raise ConfigError(f"unknown hhh mode {mode!r}")
    if cfg.adversary == "oblivious":
        adv = lambda: PlantedStreamAdversary(n, planted, pc, m - pc)
    elif cfg.adversary == "adaptive":
        adv = lambda: SmallestCounterAdversary(n, planted, pc, m - pc)
    else:
        raise ConfigError(f"unknown adversary {cfg.adversary!r} for hhh")
    return GameSetup(alg, adv, heavy_item_contract((0, planted)), m, _universe(n, m))


def _morris_setup(cfg: ExperimentConfig) -> GameSetup:
    p = cfg.params
    eps, delta, m = float(p.get("epsilon", 0.1)), float(p.get("delta", 0.01)), int(p.get("m", 10000))
    alg = lambda: MorrisCounter.from_accuracy(eps, delta)
    if cfg.adversary == "oblivious":
        adv = lambda: ObliviousAdversary([(1, 1)] * m)
    elif cfg.adversary == "adaptive":
        adv = lambda: StoppingTimeAdversary(m, trigger=float(p.get("trigger", eps / 2)))
    else:
        raise ConfigError(f"unknown adversary {cfg.adversary!r} for morris")
    return GameSetup(alg, adv, count_contract(eps), m, UniverseParams(1))


def _ams_setup(cfg: ExperimentConfig) -> GameSetup:
    p = cfg.params
    n, r = int(p.get("universe", 128)), int(p.get("rows", 128))
    rounds = int(p.get("rounds", n))
    params = UniverseParams(n, StreamKind.INSERTION_ONLY)
    if cfg.adversary in ("sign-cancel", "adaptive"):
        adv = lambda: SignCancellationAdversary(rounds, shape=(n, r))
    elif cfg.adversary == "oblivious":
        adv = lambda: ObliviousAdversary([(j % n + 1, 1) for j in range(rounds)])
    else:
        raise ConfigError(f"unknown adversary {cfg.adversary!r} for ams")
    return GameSetup(lambda: AmsSketch(n, r), adv, f2_contract(params, float(p.get("tolerance", 0.5))), rounds, params)


def _equality_setup(cfg: ExperimentConfig) -> GameSetup:
    p = cfg.params
    prime = p.get("p")
    if cfg.algorithm == "karp_rabin":
        alg = lambda: KarpRabinTester()
        adv = lambda: FermatAdversary(int(prime) if prime else None)
        bound_p = int(prime) if prime else 1 << 12
    else:
        if not prime:
            raise ConfigError("crhf games need the prime p of the Fermat pair")
        alg = lambda: StreamEqualityTester(DlFingerprinter())
        adv = lambda: FermatAdversary(int(prime))
        bound_p = int(prime)
    if cfg.adversary not in ("fermat", "adaptive"):
        raise ConfigError(f"unknown adversary {cfg.adversary!r} for string equality")
    return GameSetup(alg, adv, equality_contract(), 2 * (bound_p + 1))


EXPERIMENTS: dict[str, Callable[[ExperimentConfig], GameSetup]] = {
    "mg": _hh_setup,
    "bernmg": _hh_setup,
    "robust": _hh_setup,
    "compressed": _hh_setup,
    "hhh": _hhh_setup,
    "bernhhh": _hhh_setup,
    "robust_hhh": _hhh_setup,
    "morris": _morris_setup,
    "ams": _ams_setup,
    "karp_rabin": _equality_setup,
    "crhf": _equality_setup,
}


def build_setup(cfg: ExperimentConfig) -> GameSetup:
    try:
        builder = EXPERIMENTS[cfg.algorithm]
    except KeyError:
        raise ConfigError(f"unknown algorithm {cfg.algorithm!r}; choose from {sorted(EXPERIMENTS)}") from None
    if cfg.trials < 1:
        raise ConfigError("trials must be at least 1")
    return builder(cfg)


def _report_items(answer) -> list:
    items = getattr(answer, "items", answer)
    return items if isinstance(items, list) else []


def run_experiment(cfg: ExperimentConfig) -> dict:
    """Runs cfg.trials games and summarizes them. Identical configs give identical reports,
    except for the latency block, which only appears with timing on."""
    setup = build_setup(cfg)
    failures = 0
    bits: list[int] = []
    per_round_us: list[float] = []
    first = None
    for i in range(cfg.trials):
        t0 = time.perf_counter()
        tr = run_game(setup.algorithm(), setup.adversary(), setup.contract, setup.max_rounds,
                      derive_seed(cfg.seed, "trial", i), setup.params, cfg.white_box)
        elapsed = time.perf_counter() - t0
        failures += tr.failed
        bits.append(state_size_bits(tr.final_state))
        rounds = max(1, len(tr.rounds))
        per_round_us.append(1e6 * elapsed / rounds)
        if first is None:
            first = tr
    final = first.final_state
    answer = final.answer
    report = {
        "command": "game",
        "config": cfg.to_dict(),
        "trials": cfg.trials,
        "failures": failures,
        "failure_rate": failures / cfg.trials,
        "state_bits": {"mean": statistics.fmean(bits), "max": max(bits)},
        "first_trial": {
            "rounds": len(first.rounds),
            "failed_at": first.failed_at,
            "answer": to_jsonable(answer),
        },
    }
    items = _report_items(answer)
    if items and all(isinstance(x, tuple) and len(x) == 2 for x in items):
        report["items"] = [to_jsonable(k) for k, _ in items]
        report["estimates"] = [[to_jsonable(k), float(v)] for k, v in items]
    if cfg.timing:
        report["latency_us_per_round"] = {"mean": statistics.fmean(per_round_us), "max": max(per_round_us)}
    return report


# ------------------------------------------------------------ demo


def _ones(bits) -> list[int]:
    return [j for j, b in enumerate(bits, 1) if b]


def demo_attacks(seed: int = 0) -> tuple[str, dict]:
    """Fermat pair against Karp-Rabin, the same pair against the DL hash,
    and sign cancellation against a one-row AMS sketch."""
    lines = []
    kr_game = run_game(KarpRabinTester(), FermatAdversary(), equality_contract(), 1 << 14, derive_seed(seed, "kr"))
    kr = kr_game.initial.algorithm
    p, x = kr.p, kr.x
    plan = FermatAdversary(p).plan(p)
    u = [b for t, b in plan if t == 0]
    v = [b for t, b in plan if t == 1]
    fu = sum(pow(x, j, p) for j in _ones(u)) % p
    fv = sum(pow(x, j, p) for j in _ones(v)) % p
    lines.append("Karp-Rabin (white-box Fermat pair)")
    lines.append(f"  p = {p}, x = {x}, |U| = |V| = {len(u)}")
    lines.append(f"  U has a single 1 at position {_ones(u)[0]}, V at position {_ones(v)[0]}")
    lines.append(f"  KR(U) = {fu}, KR(V) = {fv}, equal = {fu == fv}")
    lines.append(f"  tester wrongly answered 'equal' at round {kr_game.failed_at}")

    fp = DlFingerprinter()
    hu, hv = fp.fingerprint(u), fp.fingerprint(v)
    lines.append("Discrete-log hash on the same pair")
    lines.append(f"  h(U) = {hu:#x}")
    lines.append(f"  h(V) = {hv:#x}, distinguished = {hu != hv}")

    n, rounds = 16, 10
    params = UniverseParams(n)
    ams_game = run_game(AmsSketch(n, 1), SignCancellationAdversary(rounds), f2_contract(params),
                        rounds, derive_seed(seed, "ams"), params)
    f = [0] * (n + 1)
    lines.append("AMS with one row under sign cancellation")
    for rec in ams_game.rounds:
        f[rec.update[0]] += rec.update[1]
        est = rec.answer
        lines.append(f"  round {rec.round:2d}: insert {rec.update[0]:2d}  estimate {est:g}  true F2 {sum(c * c for c in f)}")
    final_est = ams_game.rounds[-1].answer
    f2 = sum(c * c for c in f)
    lines.append(f"  final estimate {final_est:g} with true F2 = {f2}")
    summary = {
        "karp_rabin": {"p": p, "x": x, "length": len(u), "fp_u": fu, "fp_v": fv, "collide": fu == fv,
                       "failed_at": kr_game.failed_at},
        "crhf": {"h_u": hu, "h_v": hv, "distinguished": hu != hv},
        "ams": {"final_estimate": final_est, "true_f2": f2},
    }
    return "\n".join(lines), summary

