import json
import subprocess
import sys

import pytest

from hierperc import cli


def run_cli(args, capsys):
    code = cli.run(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_erconn_example(capsys):
    code, out, _ = run_cli(["erconn", "--seed", "1", "--n", "3", "--p", "0.5", "--exact"], capsys)
    assert code == 0
    header, row = out.strip().splitlines()
    cols = header.split(",")
    assert cols[0] == "experiment_id"
    assert float(row.split(",")[cols.index("exact")]) == 0.5


def test_seed_is_mandatory(capsys):
    code, _, err = run_cli(["erconn", "--n", "3", "--p", "0.5", "--exact"], capsys)
    assert code == 2 and "seed" in err


def test_same_seed_same_bytes(capsys):
    args = ["simulate", "--seed", "9", "--N", "2", "--c", "4", "--k", "8", "--replicates", "6"]
    _, a, _ = run_cli(args, capsys)
    _, b, _ = run_cli(args, capsys)
    _, c, _ = run_cli(args + ["--workers", "3"], capsys)
    assert a == b == c
    _, d, _ = run_cli(["simulate", "--seed", "10", *args[3:]], capsys)
    assert d != a


def test_workers_from_environment(capsys, monkeypatch):
    args = ["erconn", "--seed", "2", "--n", "8", "--p", "0.4", "--mc", "--replicates", "9000"]
    _, a, _ = run_cli(args, capsys)
    monkeypatch.setenv("HIERPERC_WORKERS", "2")
    _, b, _ = run_cli(args, capsys)
    assert a == b
    monkeypatch.setenv("HIERPERC_WORKERS", "two")
    assert run_cli(args, capsys)[0] == 2


@pytest.mark.filterwarnings("ignore:c_2")
def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# mean-field run\nseed = 3\nkmax = 200\nshift = 4\nformat = json\n")
    code, out, _ = run_cli(["meanfield", "--config", str(cfg)], capsys)
    assert code == 0
    doc = json.loads(out)
    assert doc["params"]["kmax"] == 200 and len(doc["rows"]) == 200
    code, out, _ = run_cli(["meanfield", "--config", str(cfg), "--kmax", "300"], capsys)
    assert len(json.loads(out)["rows"]) == 300
    bad = tmp_path / "bad.cfg"
    bad.write_text("seed = 3\nnot_a_key = 1\n")
    assert run_cli(["meanfield", "--config", str(bad)], capsys)[0] == 2
    flags = tmp_path / "flags.cfg"
    flags.write_text("seed = 1\nn = 4\np = 0.5\nexact = yes\n")
    code, out, _ = run_cli(["erconn", "--config", str(flags)], capsys)
    header, row = out.strip().splitlines()
    assert code == 0
    assert float(row.split(",")[header.split(",").index("exact")]) == pytest.approx(19 / 32, abs=1e-15)


@pytest.mark.filterwarnings("ignore:c_2")
def test_experiment_id_ignores_run_options(tmp_path, capsys):
    args = ["meanfield", "--seed", "1", "--kmax", "100", "--shift", "4", "--format", "json"]
    a = json.loads(run_cli(args, capsys)[1])
    out = tmp_path / "o.json"
    assert run_cli(args + ["--workers", "2", "--out", str(out)], capsys)[0] == 0
    b = json.loads(out.read_text())
    assert a["experiment_id"] == b["experiment_id"]
    c = json.loads(run_cli(["meanfield", "--seed", "1", "--kmax", "101", "--shift", "4", "--format", "json"], capsys)[1])
    assert c["experiment_id"] != a["experiment_id"]


@pytest.mark.filterwarnings("ignore:c_2")
def test_meanfield_positive_product(capsys):
    code, out, _ = run_cli(["meanfield", "--seed", "1", "--a", "2", "--shift", "4", "--kmax", "10000", "--format", "json"], capsys)
    doc = json.loads(out)
    assert code == 0 and doc["summary"]["product"] > 0


def test_exit_codes(capsys):
    # outside the certificate regime
    args = ["cascade", "--seed", "1", "--mode", "certificate", "--N", "8", "--K", "1", "--b", "1.5", "--a", "120", "--theta", "0.1"]
    code, _, err = run_cli(args, capsys)
    assert code == 2 and "theta" in err
    # ball too large to simulate
    code, _, err = run_cli(["simulate", "--seed", "1", "--N", "2", "--c", "4", "--k", "40"], capsys)
    assert code == 3
    # beyond the exact recursion's range is an input error, not an infeasible scale
    code, _, _ = run_cli(["erconn", "--seed", "1", "--n", "500", "--p", "0.5", "--exact"], capsys)
    assert code == 2


@pytest.mark.parametrize(
    "args",
    [
        ["asymptotics", "--seed", "1", "--kind", "annulus", "--case", "c", "--n-max", "50"],
        ["asymptotics", "--seed", "1", "--kind", "skip", "--N", "8", "--b", "1.2", "--a", "5", "--n-min", "3", "--n-max", "20"],
        ["preperc", "--seed", "1", "--n-max", "300", "--mode", "sampled"],
        ["cascade", "--seed", "1", "--N", "2", "--rate", "scaledlog", "--K", "1.5", "--a", "6", "--b", "0.5", "--head", "8", "--replicates", "20"],
    ],
)
def test_other_subcommands_run(args, capsys):
    code, out, err = run_cli(args, capsys)
    assert code == 0, err
    assert out.startswith("experiment_id,")
    assert len(out.splitlines()) > 1


def test_console_entry_point(tmp_path):
    res = subprocess.run(
        [sys.executable, "-m", "hierperc", "erconn", "--seed", "1", "--n", "2", "--p", "0.25", "--exact"],
        capture_output=True,
        text=True,
        cwd=tmp_path,
    )
    assert res.returncode == 0 and ",0.25," in res.stdout
