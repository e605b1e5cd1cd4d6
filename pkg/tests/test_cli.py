import json
import subprocess
import sys

import jsonschema
import pytest

from wbstream.cli import EXIT_INVARIANT, EXIT_OK, EXIT_USAGE, load_schema, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def report(capsys, *argv):
    code, out, _ = run(capsys, *argv)
    assert code == EXIT_OK, out
    return json.loads(out)


def test_mg_oblivious_never_fails(capsys):
    rep = report(capsys, "game", "--algorithm", "mg", "--adversary", "oblivious", "--trials", "10",
                 "--param", "m=2000")
    assert rep["failure_rate"] == 0.0 and rep["trials"] == 10


def test_ams_sign_cancel_always_fails(capsys):
    rep = report(capsys, "game", "--algorithm", "ams", "--adversary", "sign-cancel", "--trials", "10",
                 "--param", "universe=32", "--param", "rows=16")
    assert rep["failure_rate"] == 1.0


def test_reports_are_byte_identical(capsys):
    argv = ["hh", "--mode", "robust", "--m", "3000", "--trials", "3", "--seed", "9"]
    _, first, _ = run(capsys, *argv)
    _, second, _ = run(capsys, *argv)
    assert first == second


def test_reports_validate_against_schema(capsys, tmp_path):
    schema = load_schema()
    matrix = tmp_path / "m.txt"
    matrix.write_text("1 0\n0 1\n")
    graph = tmp_path / "g.txt"
    graph.write_text("1: 3\n2: 3\n3: 1 2\n")
    runs = [
        ["hh", "--m", "2000", "--trials", "2"],
        ["hh", "--mode", "compressed", "--phi", "0.3", "--m", "2000", "--trials", "2"],
        ["hhh", "--m", "2000", "--trials", "2"],
        ["l0", "--trials", "5"],
        ["rank", "--matrix-file", str(matrix)],
        ["neigh", "--graph-file", str(graph)],
        ["lbcheck", "--width", "2", "--horizon", "12", "--exhaustive"],
        ["game", "--algorithm", "morris", "--trials", "2", "--param", "m=500"],
    ]
    for argv in runs:
        rep = report(capsys, *argv)
        jsonschema.validate(rep, schema)
        assert rep["command"] == argv[0]


def test_hh_report_fields(capsys):
    rep = report(capsys, "hh", "--mode", "mg", "--adversary", "oblivious", "--m", "3000", "--trials", "2")
    assert 1 in rep["items"]
    assert rep["estimates"][0][0] == 1
    assert set(rep["state_bits"]) == {"mean", "max"}
    assert "latency_us_per_round" not in rep


def test_timing_flag_adds_latency(capsys):
    rep = report(capsys, "hh", "--mode", "mg", "--m", "500", "--trials", "1", "--timing")
    assert rep["latency_us_per_round"]["mean"] > 0


def test_l0_rank_neigh_clean_runs(capsys):
    assert report(capsys, "l0", "--trials", "20")["violations"] == 0
    rep = report(capsys, "rank", "--trials", "30", "--k", "2")
    assert rep["violations"] == 0 and rep["inconclusive"] == 0
    assert report(capsys, "neigh", "--trials", "5")["violations"] == 0


def test_rank_matrix_file(capsys, tmp_path):
    path = tmp_path / "m.txt"
    path.write_text("1 1\n1 1\n")
    rep = report(capsys, "rank", "--matrix-file", str(path), "--k", "2")
    assert rep["decision"] == "rank<k" and rep["exact_rank"] == 1


def test_l0_stream_file(capsys, tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("1 1\n2 1\n5 1\n7 3\n7 -3\n")
    rep = report(capsys, "l0", "--universe", "16", "--stream-file", str(path))
    assert (rep["estimate"], rep["l0"]) == (2, 3)


def test_match_prints_positions(capsys, tmp_path):
    (tmp_path / "p").write_text("0101")
    (tmp_path / "t").write_text("010101")
    out_json = tmp_path / "r.json"
    code, out, _ = run(capsys, "match", "--pattern-file", str(tmp_path / "p"), "--text-file", str(tmp_path / "t"),
                       "--binary", "--out", str(out_json))
    assert code == EXIT_OK and out == "0\n2\n"
    rep = json.loads(out_json.read_text())
    assert rep["positions"] == [0, 2] and rep["period"] == 2


def test_match_bad_period_is_usage_error(capsys, tmp_path):
    (tmp_path / "p").write_text("abab")
    (tmp_path / "t").write_text("ababab")
    code, _, err = run(capsys, "match", "--pattern-file", str(tmp_path / "p"), "--text-file", str(tmp_path / "t"),
                       "--period", "3")
    assert code == EXIT_USAGE and "period" in err


def test_demo_sections(capsys):
    code, out, _ = run(capsys, "demo")
    assert code == EXIT_OK
    for word in ("Karp-Rabin", "Discrete-log hash", "AMS"):
        assert word in out


def test_demo_summary_written(capsys, tmp_path):
    path = tmp_path / "demo.json"
    assert run(capsys, "demo", "--out", str(path))[0] == EXIT_OK
    rep = json.loads(path.read_text())
    assert rep["karp_rabin"]["collide"] and rep["crhf"]["distinguished"]
    assert rep["ams"]["final_estimate"] == 0 and rep["ams"]["true_f2"] > 0


def test_lbcheck_width_three_exhaustive(capsys):
    rep = report(capsys, "lbcheck", "--width", "3", "--horizon", "64", "--exhaustive")
    assert rep["examined"] == 729 and rep["approximating"] == 0 and rep["violations"] == 0


def test_usage_errors(capsys, tmp_path):
    assert run(capsys, "nonsense")[0] == EXIT_USAGE
    assert run(capsys, "hh", "--mode", "bogus")[0] == EXIT_USAGE
    assert run(capsys, "game", "--algorithm", "mg", "--adversary", "clairvoyant")[0] == EXIT_USAGE
    assert run(capsys, "game", "--algorithm", "mg", "--param", "oops")[0] == EXIT_USAGE
    assert run(capsys, "lbcheck", "--width", "9", "--exhaustive")[0] == EXIT_USAGE
    assert run(capsys, "rank", "--k", "5", "--dim", "3")[0] == EXIT_USAGE
    assert run(capsys, "hh", "--config", str(tmp_path / "missing.cfg"))[0] == EXIT_USAGE
    assert run(capsys, "--help")[0] == EXIT_OK


def test_duplicate_vertex_is_usage_error(capsys, tmp_path):
    path = tmp_path / "g.txt"
    path.write_text("1: 2\n1: 3\n")
    assert run(capsys, "neigh", "--graph-file", str(path))[0] == EXIT_USAGE


def test_invariant_exit_code(capsys, tmp_path, monkeypatch):
    import wbstream.cli as cli

    (tmp_path / "p").write_text("ab")
    (tmp_path / "t").write_text("abab")
    monkeypatch.setattr(cli, "pattern_match", lambda *a, **k: [1])
    code, _, _ = run(capsys, "match", "--pattern-file", str(tmp_path / "p"), "--text-file", str(tmp_path / "t"))
    assert code == EXIT_INVARIANT == 3


def test_config_file_with_flag_override(capsys, tmp_path):
    cfg = tmp_path / "hh.cfg"
    cfg.write_text("# small run\nmode = mg\nadversary = oblivious\nm = 1500\ntrials = 2\nseed = 4\n")
    rep = report(capsys, "hh", "--config", str(cfg))
    assert rep["config"]["algorithm"] == "mg" and rep["trials"] == 2 and rep["seed"] == 4
    rep = report(capsys, "hh", "--config", str(cfg), "--trials", "3", "--mode", "bernmg")
    assert rep["config"]["algorithm"] == "bernmg" and rep["trials"] == 3


def test_bad_config_keys(capsys, tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = red\n")
    assert run(capsys, "hh", "--config", str(cfg))[0] == EXIT_USAGE
    cfg.write_text("mode = quantum\n")
    assert run(capsys, "hh", "--config", str(cfg))[0] == EXIT_USAGE
    cfg.write_text("black_box = maybe\n")
    assert run(capsys, "hh", "--config", str(cfg))[0] == EXIT_USAGE


def test_console_script_entry_point():
    proc = subprocess.run([sys.executable, "-m", "wbstream.cli", "rank", "--trials", "5"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["command"] == "rank"
