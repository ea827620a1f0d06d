from __future__ import annotations

import json

import numpy as np
import pandas as pd
import pytest

from cheeger_lab.errors import InvalidParametersError, MissingSizeError
from cheeger_lab.estimators import bounds, deviation, mean_std
from cheeger_lab.research.charts import emit_charts, histogram_edges
from cheeger_lab.research.dataset import GraphRecord
from cheeger_lab.research.reports import (
    ChartSpec,
    ReportTable,
    dnn_experiment,
    regression_experiment,
    table1_report,
)


def _k4_record(index: int) -> GraphRecord:
    return GraphRecord(
        n=4,
        k=3,
        index=index,
        seed_master=7,
        seed_stream=index,
        spectrum=(3.0, -1.0, -1.0, -1.0),
        h_num=4,
        h_den=2,
        h=2.0,
    )


def test_table1_k4_copies_are_tight():
    report = table1_report({4: [_k4_record(i) for i in range(5)]}, [4])
    row = report.tables["bounds"].iloc[0]
    assert row["records"] == 5
    assert row["mean_dh_lower"] == pytest.approx(0.0)
    assert row["mean_dh_upper"] == pytest.approx(0.0)
    assert "0.00" in report.to_text()


def test_table1_means_recompute_from_records(small_dataset):
    report = table1_report(small_dataset, [8, 10])
    df = report.tables["bounds"]
    for n in (8, 10):
        records = small_dataset[n]
        lower = mean_std(deviation(bounds(r.k, r.n, r.lambda1).lower, r.h) for r in records)[0]
        upper = mean_std(deviation(bounds(r.k, r.n, r.lambda1).upper, r.h) for r in records)[0]
        row = df[df["n"] == n].iloc[0]
        assert row["mean_dh_lower"] == lower
        assert row["mean_dh_upper"] == upper
        assert 0.0 <= row["mean_dh_lower"] < 1.0


def test_table1_missing_size(small_dataset):
    with pytest.raises(MissingSizeError):
        table1_report(small_dataset, [12])


def test_regression_tables(small_dataset):
    report = regression_experiment(small_dataset, [1, 2, 3, 4], train_sizes=[8], predict_sizes=[10])
    in_sample = report.tables["in_sample"]
    assert sorted(in_sample["m"].unique()) == [1, 2, 3, 4]
    assert set(in_sample["n"]) == {8, 10}
    assert set(report.tables["coefficients"].columns) == {"n", "a", "b", "c"}
    prediction = report.tables["prediction"]
    assert prediction[["train_n", "target_n"]].values.tolist() == [[8, 10]]
    assert prediction["target_parity"].tolist() == ["even"]
    assert report.tables["gap_bins"]["records"].groupby(report.tables["gap_bins"]["n"]).sum().to_dict() == {
        8: 60,
        10: 60,
    }


def test_regression_missing_size(small_dataset):
    with pytest.raises(MissingSizeError):
        regression_experiment(small_dataset, [2], train_sizes=[8], predict_sizes=[14])


def test_dnn_experiment_structure(small_dataset):
    report = dnn_experiment(small_dataset, [8], [10], "moderate", trainings=2, eigs=(2, 0), master_seed=3)
    in_sample = report.tables["in_sample"]
    assert in_sample["eigs"].tolist() == ["2", "all"]
    assert (in_sample["epochs_run"] == 50).all()
    assert pd.isna(in_sample.loc[in_sample["eigs"] == "all", "lr_mean_dh"]).all()
    prediction = report.tables["prediction"]
    # Full-spectrum models are tied to their n and are not used across sizes.
    assert prediction["eigs"].tolist() == ["2"]
    assert prediction["target_n"].tolist() == [10]
    names = {c.name for c in report.charts}
    assert "dnn_histogram_n8_eigs2" in names
    assert "dnn_eigs_comparison" in names
    assert "dnn_vs_linear_n8_eigs2" in names


def test_dnn_experiment_is_deterministic(small_dataset):
    a = dnn_experiment(small_dataset, [8], [10], "moderate", trainings=1, master_seed=5)
    b = dnn_experiment(small_dataset, [8], [10], "moderate", trainings=1, master_seed=5)
    pd.testing.assert_frame_equal(a.tables["prediction"], b.tables["prediction"])


def test_dnn_rejects_unknown_regime(small_dataset):
    with pytest.raises(InvalidParametersError):
        dnn_experiment(small_dataset, [8], [10], "quick")


def test_emit_table1_chart_matches_table(small_dataset, tmp_path):
    report = table1_report(small_dataset, [8, 10])
    emit_charts(report, tmp_path)
    chart = pd.read_csv(tmp_path / "table1_bound_deviation.csv")
    table = report.tables["bounds"]
    assert chart["n"].tolist() == table["n"].tolist()
    assert chart["mean_dh_lower"].tolist() == pytest.approx(table["mean_dh_lower"].tolist(), rel=1e-9)
    assert (tmp_path / "table1_bound_deviation.svg").read_text(encoding="utf-8").lstrip().startswith("<?xml")
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["charts"] == ["table1_bound_deviation.svg"]
    assert manifest["tables"] == ["table1_bounds.csv"]
    assert manifest["skipped"] == []


def test_emit_charts_is_deterministic(small_dataset, tmp_path):
    report = table1_report(small_dataset, [8, 10])
    emit_charts(report, tmp_path / "a")
    emit_charts(report, tmp_path / "b")
    for name in ("table1_bound_deviation.svg", "table1_bound_deviation.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_emit_charts_skips_empty_series(tmp_path):
    empty = ChartSpec(name="nothing", kind="line", data=pd.DataFrame(columns=["n", "y"]), x="n", ys=("y",))
    report = ReportTable(name="demo", tables={"t": pd.DataFrame({"n": [1]})}, charts=[empty])
    emit_charts(report, tmp_path)
    manifest = json.loads((tmp_path / "manifest.json").read_text(encoding="utf-8"))
    assert manifest["charts"] == []
    assert manifest["skipped"] == ["nothing: empty series"]
    assert not (tmp_path / "nothing.svg").exists()


def test_histogram_uses_half_percent_bins(tmp_path):
    data = pd.DataFrame({"split": ["train"] * 4 + ["validation"] * 2, "deviation": [0.001, 0.004, 0.006, 0.021, 0.002, 0.013]})
    spec = ChartSpec(name="hist", kind="hist", data=data, x="deviation", group="split", bin_width=0.005)
    emit_charts(ReportTable(name="h", charts=[spec]), tmp_path)
    assert (tmp_path / "hist.svg").exists()
    assert np.diff(histogram_edges(data["deviation"].to_numpy(), 0.005)).tolist() == pytest.approx([0.005] * 5)
    assert pd.read_csv(tmp_path / "hist.csv")["deviation"].tolist() == pytest.approx(data["deviation"].tolist())


def test_emit_charts_rejects_empty_report(tmp_path):
    with pytest.raises(InvalidParametersError):
        emit_charts(ReportTable(name="empty"), tmp_path)
