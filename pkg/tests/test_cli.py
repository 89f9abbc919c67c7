import json
import subprocess
import sys

import pytest

from twotype_gt.cli import EXIT_BUDGET, EXIT_INVALID, EXIT_IO, EXIT_OK, main
from twotype_gt.harness import parse_records_csv
from twotype_gt.pooling import build_design, import_design, parse_matrix, stack_planes, export_matrix


@pytest.fixture
def design_file(tmp_path):
    path = tmp_path / "design.txt"
    assert main(["design", "--q", "3", "--ka", "0", "--kb", "1", "--kab", "2", "--out", str(path)]) == EXIT_OK
    return path


def test_design_command(design_file):
    d = import_design(design_file)
    ref = build_design(3, [0], [1], [2])
    assert (d.M_A, d.M_B, d.M_AB) == (ref.M_A, ref.M_B, ref.M_AB)


def test_design_overlap_rejected(tmp_path, capsys):
    rc = main(["design", "--q", "3", "--ka", "0,2", "--kb", "1", "--kab", "2"])
    assert rc == EXIT_INVALID
    assert "overlap" in capsys.readouterr().err


def test_design_from_config(tmp_path):
    cfg = tmp_path / "d.cfg"
    cfg.write_text("q = 2\nka = 0\nkb = 0\nkab = 1\n")
    out = tmp_path / "d.txt"
    assert main(["design", "--config", str(cfg), "--out", str(out)]) == EXIT_OK
    assert import_design(out).M_AB.n_rows == 4


def test_verify_design(design_file, capsys):
    rc = main(["verify", str(design_file), "--collinearity", "--disjunct", "1", "--separable", "1",
               "--two-separable", "1", "--format", "json"])
    assert rc == EXIT_OK
    report = json.loads(capsys.readouterr().out)
    assert report["kind"] == "design"
    assert "unavailable" in report["provenance"]
    assert report["matrices"]["M_A"]["unique_collinearity"] is True
    assert report["matrices"]["M_A"]["1-disjunct"] is False     # a single plane
    assert report["matrices"]["M_A_bar"]["1-disjunct"] is True


def test_verify_matrix_text(tmp_path, capsys):
    p = tmp_path / "m.txt"
    export_matrix(stack_planes(3, [0, 1]), p)
    assert main(["verify", str(p), "--disjunct", "1", "--collinearity"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "1-disjunct: True" in out and "unique_collinearity: True" in out


def test_verify_budget_exit(design_file):
    assert main(["verify", str(design_file), "--separable", "3", "--budget", "100"]) == EXIT_BUDGET


def test_verify_missing_file(tmp_path):
    assert main(["verify", str(tmp_path / "missing.txt")]) == EXIT_IO


def test_verify_malformed(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("2 2\n0 1\n1 x\n")
    assert main(["verify", str(p)]) == EXIT_INVALID


def test_simulate_csv(design_file, tmp_path):
    out = tmp_path / "m.csv"
    rc = main(["simulate", str(design_file), "--seed", "3", "--count-a", "1", "--count-b", "1",
               "--out", str(out)])
    assert rc == EXIT_OK
    lines = out.read_text().splitlines()
    assert lines[0].startswith("item,q00,q01,q10,q11,p_A,p_B,truth_A,truth_B")
    assert len(lines) == 82


def test_simulate_json_deterministic(design_file, capsys):
    args = ["simulate", str(design_file), "--seed", "3", "--count-a", "2", "--count-b", "1", "--format", "json"]
    main(args)
    a = capsys.readouterr().out
    main(args)
    b = capsys.readouterr().out
    assert a == b
    data = json.loads(a)
    assert sum(r["truth_A"] for r in data["marginals"]) == 2
    for r in data["marginals"]:
        assert abs(r["q00"] + r["q01"] + r["q10"] + r["q11"] - 1) < 1e-12


def test_simulate_exact_budget(design_file):
    rc = main(["simulate", str(design_file), "--count-a", "1", "--count-b", "1", "--exact"])
    assert rc == EXIT_BUDGET


def test_experiment_with_config(tmp_path, capsys):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("""# small grid
q = 3
grid-k = 1,2
grid-counts = 1
replications = 5
seed = 11
""")
    out = tmp_path / "results"
    rc = main(["experiment", "--config", str(cfg), "--out", str(out), "--replications", "4"])
    assert rc == EXIT_OK
    table = capsys.readouterr().out
    assert "k=1" in table and "k=2" in table
    recs = parse_records_csv((out / "records_0.csv").read_text())
    assert len(recs) == 4            # the flag overrides the config
    assert (out / "summary.txt").exists() and (out / "results.json").exists()


def test_experiment_single_design(tmp_path, capsys):
    rc = main(["experiment", "--q", "3", "--ka", "0,1", "--kb", "0,1", "--kab", "2",
               "--count-a", "1", "--count-b", "1", "--replications", "3", "--format", "csv",
               "--out", str(tmp_path)])
    assert rc == EXIT_OK
    assert (tmp_path / "summary.csv").read_text().count("\n") == 2


def test_experiment_bad_config(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("replications = 0\nq = 3\nka=0\nkb=1\nkab=2\n")
    assert main(["experiment", "--config", str(cfg)]) == EXIT_INVALID


def test_module_entry_point(tmp_path):
    r = subprocess.run([sys.executable, "-m", "twotype_gt", "design", "--q", "2", "--ka", "0",
                        "--kb", "0", "--kab", "1"], capture_output=True, text=True)
    assert r.returncode == 0
    assert r.stdout.startswith("#A\n4 16\n")
    assert parse_matrix(r.stdout.split("#B")[0].replace("#A", "")).shape == (4, 16)
