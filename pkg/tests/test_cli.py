from __future__ import annotations

import json

import pytest

from cheeger_lab.cli import build_parser, run
from cheeger_lab.research.verify import run_verify

SUBCOMMAND_FLAGS = {
    "generate": ["--config", "--sizes", "--n", "--k", "--count", "--threads", "--format", "--seed", "--out"],
    "solve": ["--graph", "--n", "--k", "--threads", "--format", "--seed"],
    "spectrum": ["--graph", "--n", "--k", "--format", "--seed"],
    "bounds": ["--k", "--n", "--lambda1", "--format"],
    "fit": ["--dataset", "--eigs", "--model", "--out"],
    "train": ["--dataset", "--eigs", "--model", "--regime", "--epochs", "--seed", "--out"],
    "predict": ["--dataset", "--model", "--eigs", "--format"],
    "report": [
        "--config", "--dataset", "--kind", "--sizes", "--train-sizes", "--predict-sizes",
        "--eigs", "--regime", "--trainings", "--seed", "--out",
    ],
    "verify": ["--max-n", "--samples", "--seed"],
}


@pytest.fixture(autouse=True)
def _isolated_output(monkeypatch, tmp_path):
    monkeypatch.setenv("CHEEGER_LAB_DIR", str(tmp_path / "runs"))


@pytest.mark.parametrize("command", sorted(SUBCOMMAND_FLAGS))
def test_help_documents_every_flag(command, capsys):
    assert run([command, "--help"]) == 0
    text = capsys.readouterr().out
    for flag in SUBCOMMAND_FLAGS[command]:
        assert flag in text


def test_parser_knows_every_command():
    parser = build_parser()
    sub = next(a for a in parser._actions if a.dest == "command")
    assert set(sub.choices) == set(SUBCOMMAND_FLAGS)


def test_solve_k4(capsys):
    assert run(["solve", "--n", "4", "--k", "3", "--seed", "1"]) == 0
    assert capsys.readouterr().out.strip() == "h = 2 (= 4/2)"


def test_solve_edge_list(tmp_path, capsys):
    path = tmp_path / "c6.txt"
    path.write_text("\n".join(f"{v} {(v + 1) % 6}" for v in range(6)) + "\n", encoding="utf-8")
    assert run(["solve", "--graph", str(path), "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert (payload["numerator"], payload["denominator"]) == (2, 3)


def test_bounds_k4(capsys):
    assert run(["bounds", "--k", "3", "--n", "4", "--lambda1", "-1", "--format", "json"]) == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["lower"] == pytest.approx(2.0)
    assert payload["upper"] == pytest.approx(2.0)


def test_spectrum_command(capsys):
    assert run(["spectrum", "--n", "4", "--k", "3"]) == 0
    values = [float(v) for v in capsys.readouterr().out.split()]
    assert values == pytest.approx([3.0, -1.0, -1.0, -1.0], abs=1e-8)


def test_unknown_flag_is_usage_error(capsys):
    assert run(["solve", "--bogus"]) == 1
    assert "--bogus" in capsys.readouterr().err


def test_missing_graph_source_is_usage_error(capsys):
    assert run(["solve", "--n", "4"]) == 1
    assert "--graph" in capsys.readouterr().err


def test_fit_eigs_out_of_range_is_usage_error(small_dataset_dir, tmp_path, capsys):
    args = ["fit", "--dataset", str(small_dataset_dir), "--eigs", "7", "--model", str(tmp_path / "lr.txt")]
    assert run(args) == 1
    assert "--eigs" in capsys.readouterr().err


def test_malformed_dataset_is_data_error(tmp_path, capsys):
    bad = tmp_path / "records_n8.jsonl"
    bad.write_text("{not json\n", encoding="utf-8")
    args = ["fit", "--dataset", str(bad), "--model", str(tmp_path / "lr.txt"), "--out", str(tmp_path)]
    assert run(args) == 2
    assert "invalid JSON" in capsys.readouterr().err


def test_malformed_config_is_data_error(tmp_path, capsys):
    broken = tmp_path / "broken.json"
    broken.write_text('{"sizes": [8,', encoding="utf-8")
    assert run(["generate", "--config", str(broken), "--out", str(tmp_path)]) == 2
    assert "broken.json" in capsys.readouterr().err


def test_odd_parameters_are_data_errors(capsys):
    assert run(["solve", "--n", "5", "--k", "3"]) == 2
    assert "odd" in capsys.readouterr().err


def test_generate_fit_train_predict(tmp_path, capsys):
    out = tmp_path / "lab"
    assert run(["generate", "--n", "10", "--count", "60", "--out", str(out), "--format", "csv"]) == 0
    dataset = out / "dataset"
    assert (dataset / "records_n10.jsonl").exists()
    assert (dataset / "records.csv").exists()

    lr_a = tmp_path / "lr_a.txt"
    lr_b = tmp_path / "lr_b.txt"
    assert run(["fit", "--dataset", str(dataset), "--eigs", "2", "--model", str(lr_a), "--out", str(out)]) == 0
    assert run(["fit", "--dataset", str(dataset), "--eigs", "2", "--model", str(lr_b), "--out", str(out)]) == 0
    assert lr_a.read_bytes() == lr_b.read_bytes()

    net_a = tmp_path / "net_a.txt"
    net_b = tmp_path / "net_b.txt"
    for path in (net_a, net_b):
        args = ["train", "--dataset", str(dataset), "--model", str(path), "--regime", "moderate", "--epochs", "3"]
        assert run([*args, "--seed", "4", "--out", str(out)]) == 0
    assert net_a.read_bytes() == net_b.read_bytes()
    report = json.loads((tmp_path / "net_a.txt.report.json").read_text(encoding="utf-8"))
    assert report["epochs_run"] == 3

    capsys.readouterr()
    assert run(["predict", "--dataset", str(dataset), "--model", str(lr_a)]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "n,k,index,h,h_est"
    assert len(lines) == 61
    assert run(["predict", "--dataset", str(dataset), "--model", str(net_a), "--format", "json"]) == 0
    assert len(json.loads(capsys.readouterr().out)) == 60

    runs = [json.loads(line) for line in (out / "runs.jsonl").read_text(encoding="utf-8").splitlines()]
    assert [r["command"] for r in runs] == ["generate", "fit", "fit", "train", "train"]
    assert all(r["status"] == "ok" for r in runs)


def test_generate_is_byte_identical_across_threads(tmp_path):
    a = tmp_path / "a"
    b = tmp_path / "b"
    assert run(["generate", "--n", "8", "--count", "24", "--out", str(a)]) == 0
    assert run(["generate", "--n", "8", "--count", "24", "--threads", "2", "--out", str(b)]) == 0
    name = "dataset/records_n8.jsonl"
    assert (a / name).read_bytes() == (b / name).read_bytes()


def test_generate_rejects_odd_pair(tmp_path):
    assert run(["generate", "--n", "13", "--k", "3", "--out", str(tmp_path)]) == 2


def test_report_table1(small_dataset_dir, tmp_path, capsys):
    out = tmp_path / "lab"
    args = ["report", "--dataset", str(small_dataset_dir), "--kind", "table1", "--sizes", "8,10", "--out", str(out)]
    assert run(args) == 0
    assert "table1" in capsys.readouterr().out
    assert (out / "reports" / "table1" / "manifest.json").exists()


def test_report_missing_size_is_data_error(small_dataset_dir, tmp_path):
    args = ["report", "--dataset", str(small_dataset_dir), "--sizes", "12", "--out", str(tmp_path)]
    assert run(args) == 2
    runs = (tmp_path / "runs.jsonl").read_text(encoding="utf-8").splitlines()
    assert json.loads(runs[-1])["status"] == "error"


def test_verify_small_sweep(capsys):
    assert run(["verify", "--max-n", "8", "--samples", "20"]) == 0
    assert "FAIL" not in capsys.readouterr().out


def test_run_verify_checks_all_groups():
    result = run_verify(max_n=10, samples=30, master_seed=1)
    assert result.passed, result.failures
    names = {c.name for c in result.checks}
    assert {"oracle-equivalence", "h(Petersen)", "spectrum(C6)", "gray-trace"} <= names
