"""Command line entry point: `wbstream <command> [options]`.

Exit codes: 0 ok, 2 usage or configuration error, 3 an invariant was
violated during the run.
"""
from __future__ import annotations

import argparse
import json
import random
import sys
from importlib import resources
from pathlib import Path

import jsonschema

from . import experiments
from .experiments import ConfigError, ExperimentConfig
from .game.harness import derive_seed, to_jsonable
from .graph_neighborhoods import NeighborhoodDigest, exact_neighborhood_classes, parse_graph_lines, symmetric_arrivals
from .lb_dynamics import exhaustive_search, error_function, random_search, theoretical_h
from .pattern_matching import PatternMatcher, minimal_period, naive_matches, pattern_match, to_symbols
from .stream_core import StreamError, StreamUpdate, read_stream_file, state_size_bits
from .turnstile_sketches import L0_MODULUS, L0SisSketch, RankDecision, RankSketch, exact_rank, matrix_updates

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT = 0, 2, 3


class UsageError(Exception):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("wbstream").joinpath("schemas/report.schema.json").read_text())


def read_config_file(path: str) -> dict[str, str]:
    """Flat `key = value` lines; `#` comments and blank lines are ignored."""
    out = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise UsageError(f"{path}:{lineno}: expected 'key = value'")
        out[key.strip().replace("-", "_")] = value.strip()
    return out


_TRUE, _FALSE = {"1", "true", "yes", "on"}, {"0", "false", "no", "off"}


def apply_config(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions if a.dest != "help"}
    defaults = {}
    for key, value in values.items():
        if key == "config":
            continue
        action = actions.get(key)
        if action is None:
            raise UsageError(f"unknown config key {key!r}")
        if action.nargs == 0:  # store_true style flags
            low = value.lower()
            if low not in _TRUE | _FALSE:
                raise UsageError(f"config key {key!r} expects true or false")
            defaults[key] = low in _TRUE
        else:
            if action.choices is not None and value not in action.choices:
                raise UsageError(f"config key {key!r}: {value!r} not in {sorted(action.choices)}")
            defaults[key] = value  # argparse converts string defaults with the action's type
    sub.set_defaults(**defaults)


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    p.add_argument("--config", default=None, help="flat key = value file; flags override it")
    p.add_argument("--timing", action="store_true", help="add wall-clock latency (breaks byte-identity)")
    return p


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = _common()
    parser = argparse.ArgumentParser(prog="wbstream", description="White-box robust streaming experiments.")
    subs = parser.add_subparsers(dest="command", required=True)
    table = {}

    def add(name, help_):
        sp = subs.add_parser(name, parents=[common], help=help_)
        table[name] = sp
        return sp

    sp = add("hh", "heavy hitters game")
    sp.add_argument("--epsilon", type=float, default=0.25)
    sp.add_argument("--phi", type=float, default=None)
    sp.add_argument("--universe", type=int, default=64)
    sp.add_argument("--m", type=int, default=30000, help="stream length")
    sp.add_argument("--planted", type=int, default=1)
    sp.add_argument("--planted-fraction", type=float, default=1 / 3)
    sp.add_argument("--mode", choices=["mg", "bernmg", "robust", "compressed"], default="robust")
    sp.add_argument("--adversary", choices=["oblivious", "adaptive", "file"], default="adaptive")
    sp.add_argument("--stream-file", default=None)
    sp.add_argument("--budget", type=int, default=None, help="adversary operation budget")
    sp.add_argument("--black-box", action="store_true")

    sp = add("hhh", "hierarchical heavy hitters game")
    sp.add_argument("--height", type=int, default=3)
    sp.add_argument("--fanout", type=int, default=2)
    sp.add_argument("--epsilon", type=float, default=0.2)
    sp.add_argument("--gamma", type=float, default=None)
    sp.add_argument("--m", type=int, default=8000)
    sp.add_argument("--planted", type=int, default=1)
    sp.add_argument("--planted-fraction", type=float, default=0.5)
    sp.add_argument("--mode", choices=["hhh", "bernhhh", "robust"], default="bernhhh")
    sp.add_argument("--adversary", choices=["oblivious", "adaptive"], default="adaptive")
    sp.add_argument("--black-box", action="store_true")

    sp = add("l0", "L0 estimation on turnstile streams")
    sp.add_argument("--universe", type=int, default=256)
    sp.add_argument("--epsilon", type=float, default=0.5)
    sp.add_argument("--c", type=float, default=0.25)
    sp.add_argument("--q", type=int, default=L0_MODULUS)
    sp.add_argument("--stream-file", default=None, help="turnstile updates; random streams otherwise")
    sp.add_argument("--length", type=int, default=200, help="updates per random stream")

    sp = add("rank", "rank decision sketch against exact rank")
    sp.add_argument("--k", type=int, default=2)
    sp.add_argument("--dim", type=int, default=3)
    sp.add_argument("--bound", type=int, default=4)
    sp.add_argument("--matrix-file", default=None, help="whitespace-separated integer rows")

    sp = add("neigh", "identical neighborhoods in vertex-arrival graphs")
    sp.add_argument("--graph-file", default=None, help="lines 'v: u1 u2 ...'")
    sp.add_argument("--universe", type=int, default=32, help="vertices per random graph")
    sp.add_argument("--edge-prob", type=float, default=0.5)

    sp = add("match", "periodic pattern matching")
    sp.add_argument("--pattern-file", required=True)
    sp.add_argument("--text-file", required=True)
    sp.add_argument("--period", type=int, default=None, help="minimal period; computed if omitted")
    sp.add_argument("--binary", action="store_true", help="files hold 0/1 characters instead of raw bytes")

    sp = add("lbcheck", "interval-family checks on leveled automata")
    sp.add_argument("--width", type=int, default=2)
    sp.add_argument("--horizon", type=int, default=64)
    sp.add_argument("--error-form", choices=["mult", "poly-mult", "additive"], default="mult")
    sp.add_argument("--delta", type=float, default=0.1)
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--exhaustive", action="store_true")
    g.add_argument("--random", type=int, default=None, metavar="N")

    sp = add("game", "any registered experiment")
    sp.add_argument("--algorithm", required=True, choices=sorted(experiments.EXPERIMENTS))
    sp.add_argument("--adversary", default="oblivious")
    sp.add_argument("--param", action="append", default=[], metavar="KEY=VALUE")
    sp.add_argument("--budget", type=int, default=None)
    sp.add_argument("--black-box", action="store_true")

    add("demo", "attack demonstrations")
    return parser, table


def parse_args(argv: list[str]) -> argparse.Namespace:
    parser, table = build_parser()
    args = parser.parse_args(argv)
    if args.config:
        apply_config(table[args.command], read_config_file(args.config))
        args = parser.parse_args(argv)
    return args


# ------------------------------------------------------------ commands


def _game_report(args, algorithm: str, params: dict, default_trials: int) -> dict:
    cfg = ExperimentConfig(algorithm, args.adversary, {k: v for k, v in params.items() if v is not None},
                           trials=args.trials or default_trials, seed=args.seed,
                           budget=getattr(args, "budget", None), white_box=not args.black_box, timing=args.timing)
    return experiments.run_experiment(cfg)


def cmd_hh(args) -> tuple[dict, int]:
    params = dict(universe=args.universe, epsilon=args.epsilon, phi=args.phi, m=args.m, planted=args.planted,
                  planted_fraction=args.planted_fraction, stream_file=args.stream_file)
    rep = _game_report(args, args.mode, params, 10)
    rep["command"] = "hh"
    rep.setdefault("items", [])
    rep.setdefault("estimates", [])
    return rep, EXIT_OK


def cmd_hhh(args) -> tuple[dict, int]:
    mode = "robust_hhh" if args.mode == "robust" else args.mode
    params = dict(height=args.height, fanout=args.fanout, epsilon=args.epsilon, gamma=args.gamma, m=args.m,
                  planted=args.planted, planted_fraction=args.planted_fraction)
    rep = _game_report(args, mode, params, 10)
    rep["command"] = "hhh"
    return rep, EXIT_OK


def cmd_game(args) -> tuple[dict, int]:
    params = {}
    for kv in args.param:
        key, sep, value = kv.partition("=")
        if not sep:
            raise UsageError(f"--param expects KEY=VALUE, got {kv!r}")
        params[key.strip().replace("-", "_")] = value.strip()
    return _game_report(args, args.algorithm, params, 10), EXIT_OK


def _random_turnstile(rng: random.Random, n: int, length: int) -> list[StreamUpdate]:
    ups = []
    for _ in range(length):
        c = rng.randint(1, n)
        if ups and rng.random() < 0.3:
            # cancel an earlier update so that deletions actually zero coordinates
            c0, d0 = ups[rng.randrange(len(ups))]
            ups.append(StreamUpdate(c0, -d0))
        else:
            ups.append(StreamUpdate(c, rng.choice((-3, -2, -1, 1, 2, 3))))
    return ups


def cmd_l0(args) -> tuple[dict, int]:
    n = args.universe
    if args.stream_file:
        streams = [read_stream_file(args.stream_file)]
    else:
        rng = random.Random(derive_seed(args.seed, "l0-streams"))
        streams = [_random_turnstile(rng, n, args.length) for _ in range(args.trials or 100)]
    violations, bits, rows = 0, [], []
    for i, ups in enumerate(streams):
        sk = L0SisSketch(n, args.epsilon, args.c, args.q, seed=derive_seed(args.seed, "l0", i) % (1 << 256))
        f = [0] * (n + 1)
        for u in ups:
            sk.process(u)
            f[u[0]] += u[1]
        l0 = sum(1 for v in f[1:] if v)
        est = sk.estimate()
        ok = est <= l0 <= est * n ** args.epsilon + 1e-9
        violations += not ok
        bits.append(state_size_bits(sk.to_bytes()))
        rows.append({"estimate": est, "l0": l0, "ok": ok})
    rep = {"command": "l0", "seed": args.seed, "trials": len(streams), "violations": violations,
           "width": sk.width, "chunks": sk.chunks, "rows": sk.rows,
           "state_bits": {"mean": sum(bits) / len(bits), "max": max(bits)},
           "config": {"universe": n, "epsilon": args.epsilon, "c": args.c, "q": args.q}}
    if args.stream_file:
        rep.update(rows[0])
    return rep, EXIT_INVARIANT if violations else EXIT_OK


def _read_matrix(path: str) -> list[list[int]]:
    rows = [list(map(int, line.split())) for line in Path(path).read_text().splitlines() if line.strip()]
    if not rows or any(len(r) != len(rows) for r in rows):
        raise UsageError("matrix file must hold a square integer matrix")
    return rows


def cmd_rank(args) -> tuple[dict, int]:
    if args.matrix_file:
        mats = [_read_matrix(args.matrix_file)]
    else:
        rng = random.Random(derive_seed(args.seed, "rank-matrices"))
        d = args.dim
        mats = [[[rng.choice((-1, 0, 1)) for _ in range(d)] for _ in range(d)] for _ in range(args.trials or 100)]
    dim = len(mats[0])
    if not 1 <= args.k <= dim:
        raise UsageError("need 1 <= k <= dim")
    disagree = inconclusive = 0
    results = []
    base = RankSketch(dim, args.k, seed=derive_seed(args.seed, "rank") % (1 << 256), bound=args.bound)
    for mat in mats:
        sk = base.clone()
        for u in matrix_updates(mat):
            sk.process(u)
        dec = sk.decide()
        r = exact_rank(mat)
        if dec is RankDecision.INCONCLUSIVE:
            inconclusive += 1
        elif (dec is RankDecision.AT_LEAST_K) != (r >= args.k):
            disagree += 1
        results.append({"decision": dec.value, "exact_rank": r})
    rep = {"command": "rank", "seed": args.seed, "trials": len(mats), "violations": disagree,
           "inconclusive": inconclusive, "modulus": base.q,
           "config": {"k": args.k, "dim": dim, "bound": args.bound}}
    if args.matrix_file:
        rep.update(results[0])
    return rep, EXIT_INVARIANT if disagree else EXIT_OK


def cmd_neigh(args) -> tuple[dict, int]:
    if args.graph_file:
        arrivals = parse_graph_lines(Path(args.graph_file).read_text().splitlines())
        graphs = [arrivals]
    else:
        rng = random.Random(derive_seed(args.seed, "graphs"))
        graphs = []
        n = args.universe
        for _ in range(args.trials or 100):
            adj = {v: set() for v in range(1, n + 1)}
            for u in range(1, n + 1):
                for v in range(u + 1, n + 1):
                    if rng.random() < args.edge_prob:
                        adj[u].add(v)
                        adj[v].add(u)
            graphs.append(symmetric_arrivals(adj))
    mismatches = 0
    for arrivals in graphs:
        n = max([v for v, _ in arrivals] + [u for _, nb in arrivals for u in nb] + [1])
        dg = NeighborhoodDigest(n)
        try:
            for v, nb in arrivals:
                dg.ingest(v, nb)
        except StreamError as exc:
            raise UsageError(str(exc)) from None
        classes = dg.classes()
        mismatches += classes != exact_neighborhood_classes({v: set(nb) for v, nb in arrivals})
    rep = {"command": "neigh", "seed": args.seed, "trials": len(graphs), "violations": mismatches,
           "state_bits": {"mean": state_size_bits(dg.to_bytes()), "max": state_size_bits(dg.to_bytes())}}
    if args.graph_file:
        rep["classes"] = classes
    return rep, EXIT_INVARIANT if mismatches else EXIT_OK


def cmd_match(args) -> tuple[dict, int]:
    alphabet = "binary" if args.binary else "bytes"
    read = (lambda p: Path(p).read_text()) if args.binary else (lambda p: Path(p).read_bytes())
    pattern, width = to_symbols(read(args.pattern_file), alphabet)
    text, _ = to_symbols(read(args.text_file), alphabet)
    if not pattern:
        raise UsageError("empty pattern")
    period = args.period or minimal_period(pattern)
    try:
        positions = pattern_match(pattern, period, text, width)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    ok = positions == naive_matches(pattern, text)
    sys.stdout.write("".join(f"{p}\n" for p in positions))
    bits = PatternMatcher(pattern, period, width).fingerprint_state_bits()
    rep = {"command": "match", "seed": args.seed, "positions": positions, "period": period,
           "violations": int(not ok), "state_bits": {"mean": bits, "max": bits}}
    return rep, EXIT_OK if ok else EXIT_INVARIANT


def cmd_lbcheck(args) -> tuple[dict, int]:
    eps = error_function(args.error_form, args.delta, args.horizon)
    try:
        if args.random is not None:
            res = random_search(args.width, args.horizon, eps, args.random, seed=args.seed, check=True)
        else:
            res = exhaustive_search(args.width, args.horizon, eps, check=True)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    h = theoretical_h(eps, args.horizon)
    rep = {"command": "lbcheck", "seed": args.seed, "examined": res.examined, "exhaustive": res.exhaustive,
           "approximating": res.found, "max_intervals": res.max_intervals, "theoretical_h": h,
           "violations": res.lemma_violations,
           "config": {"width": args.width, "horizon": args.horizon, "error_form": args.error_form,
                      "delta": args.delta}}
    return rep, EXIT_INVARIANT if res.lemma_violations else EXIT_OK


def cmd_demo(args) -> tuple[dict, int]:
    text, summary = experiments.demo_attacks(args.seed)
    print(text)
    ok = (summary["karp_rabin"]["collide"] and summary["crhf"]["distinguished"]
          and summary["ams"]["final_estimate"] == 0 and summary["ams"]["true_f2"] > 0)
    return {"command": "demo", "seed": args.seed, **summary}, EXIT_OK if ok else EXIT_INVARIANT


COMMANDS = {"hh": cmd_hh, "hhh": cmd_hhh, "l0": cmd_l0, "rank": cmd_rank, "neigh": cmd_neigh,
            "match": cmd_match, "lbcheck": cmd_lbcheck, "game": cmd_game, "demo": cmd_demo}


def render_report(report: dict) -> str:
    report = to_jsonable(report)
    report.setdefault("seed", 0)
    jsonschema.validate(report, load_schema())
    return json.dumps(report, sort_keys=True, indent=2) + "\n"


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors itself
        return EXIT_USAGE if exc.code else EXIT_OK
    except UsageError as exc:
        print(f"wbstream: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        report, code = COMMANDS[args.command](args)
        report.setdefault("seed", args.seed)
        text = render_report(report)
    except (UsageError, ConfigError, OSError) as exc:
        print(f"wbstream: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.out:
        Path(args.out).write_text(text)
    elif args.command not in ("match", "demo"):
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
