import csv
import io
import json
import math
import subprocess
import sys

import pytest

from kgap.cli import ConfigError, RunConfig, main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_integral_main(capsys):
    code, out, _ = run_cli(capsys, "integral", "--a", "2", "--b", "3")
    data = json.loads(out)
    assert code == 0
    assert data["value"] == pytest.approx(math.pi**2 / 18, abs=1e-10)
    assert data["abs_error"] <= data["tolerance"]


def test_integral_tilde_split(capsys):
    code, out, _ = run_cli(capsys, "integral", "--kind", "tilde-split")
    data = json.loads(out)
    assert code == 0
    assert data["value"][0] == pytest.approx(math.pi**2 / 6 - 0.5, abs=1e-9)


def test_gap_reports_sandwich(capsys):
    code, out, _ = run_cli(capsys, "gap", "--k", "2", "--s", "0.01")
    data = json.loads(out)
    assert code == 0
    assert data["sandwich"]["contains"]
    assert data["sandwich"]["r"] == 10
    assert data["lambda_k"] == pytest.approx(math.pi**2 / 18)


def test_partitions_json_and_csv(capsys):
    code, out, _ = run_cli(capsys, "partitions", "--k", "2", "--n", "4")
    assert code == 0 and json.loads(out)["count"] == 4
    code, out, _ = run_cli(capsys, "partitions", "--kind", "unrestricted", "--n", "10", "--format", "csv")
    rows = list(csv.DictReader(io.StringIO(out)))
    assert rows[-1] == {"n": "10", "count": "42"}


def test_partitions_big_integer_in_full(capsys):
    _, out, _ = run_cli(capsys, "partitions", "--kind", "unrestricted", "--n", "400")
    assert json.loads(out)["count"] == 6727090051741041926


def test_automaton_exact(capsys):
    code, out, _ = run_cli(capsys, "automaton", "--k", "2", "--L", "2", "--s", "0.5", "--exact")
    data = json.loads(out)
    assert code == 0
    assert data["exact"] == "7/16"


def test_automaton_sweep_csv(capsys):
    code, out, _ = run_cli(capsys, "automaton", "--k", "2", "--L", "3", "4", "--s", "0.2", "0.4", "--trials", "300")
    lines = out.splitlines()
    assert code == 0
    assert lines[0] == "k,variant,L,s,s_log_L,trials,spanned,estimate,ci_low,ci_high,seed"
    assert len(lines) == 5
    _, again, _ = run_cli(capsys, "automaton", "--k", "2", "--L", "3", "4", "--s", "0.2", "0.4", "--trials", "300")
    assert again == out


@pytest.mark.parametrize(
    "argv,key",
    [
        (["gap", "--k", "2", "--s", "1.5"], "--s"),
        (["gap", "--k", "0", "--s", "0.5"], "--k"),
        (["partitions", "--k", "1", "--n", "5"], "--k"),
        (["partitions", "--k", "2", "--n", "-1"], "--n"),
        (["automaton", "--k", "2", "--L", "9", "--s", "0.5", "--exact"], "--L"),
        (["automaton", "--k", "2", "--L", "3", "--s", "2"], "--s"),
        (["integral", "--a", "2"], "--b"),
        (["verify-all", "--only", "11"], "--only"),
    ],
)
def test_config_errors_name_the_key(capsys, argv, key):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert key in capsys.readouterr().err


def test_domain_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["integral", "--a", "3", "--b", "2"])
    assert exc.value.code == 2
    assert "--a" in capsys.readouterr().err


def test_run_config_validation():
    with pytest.raises(ConfigError, match="--format"):
        RunConfig("gap", {}, format="xml")
    with pytest.raises(ConfigError, match="--seed"):
        RunConfig("gap", {}, seed=-1)
    assert RunConfig("gap", {}).seed == 42


def test_output_dir_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("KGAP_OUTPUT_DIR", str(tmp_path))
    code, out, _ = run_cli(capsys, "partitions", "--k", "3", "--n", "10")
    assert code == 0 and out == ""
    data = json.loads((tmp_path / "partitions.json").read_text())
    assert data["count"] == 37
    meta = json.loads((tmp_path / "partitions.json.meta.json").read_text())
    assert meta["passed"] and "elapsed_seconds" in meta


def test_verify_subset_output(tmp_path, capsys):
    target = tmp_path / "report.json"
    code, _, err = run_cli(capsys, "verify-all", "--only", "1", "4", "--output", str(target))
    report = json.loads(target.read_text())
    assert code == 0
    assert [c["number"] for c in report["criteria"]] == [1, 4]
    assert report["passed"]
    assert err.count("PASS") == 2
    # runtimes live in the metadata file only
    assert "runtime" not in target.read_text()
    assert (tmp_path / "report.json.meta.json").exists()


def test_module_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "kgap", "partitions", "--k", "2", "--n", "10"],
        capture_output=True,
        text=True,
        check=True,
    )
    assert json.loads(proc.stdout)["count"] == 22
