from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import pandas as pd

from cheeger_lab.errors import InvalidParametersError, MissingSizeError
from cheeger_lab.estimators import (
    MAX_EIGS,
    LinearModel,
    bounds,
    deviation,
    deviation_by_gap,
    fit_linear,
    mean_std,
    predict_linear,
)
from cheeger_lab.graph import Seed
from cheeger_lab.neural import MlpModel, TrainConfig, TrainReport, mlp_predict, model_select, train
from cheeger_lab.research.dataset import GraphRecord

logger = logging.getLogger(__name__)

Dataset = Mapping[int, Sequence[GraphRecord]]

HISTOGRAM_BIN = 0.005
DEFAULT_GAP_BINS = 4
# Reference slopes the fitted (a, b) approach as n grows.
REFERENCE_A = 0.5
REFERENCE_B = -1.0 / 3.0


@dataclass(frozen=True)
class ChartSpec:
    """One figure: `data` is plotted and also written out as the chart's CSV."""

    name: str
    kind: str  # "line", "bar" or "hist"
    data: pd.DataFrame
    x: str
    ys: tuple[str, ...] = ()
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    group: str | None = None
    bin_width: float | None = None
    reference_lines: tuple[float, ...] = ()


@dataclass
class ReportTable:
    name: str
    tables: dict[str, pd.DataFrame] = field(default_factory=dict)
    charts: list[ChartSpec] = field(default_factory=list)
    float_format: str = "{:.4f}"

    @property
    def empty(self) -> bool:
        return not self.tables and not self.charts

    def to_text(self) -> str:
        blocks = []
        for title, df in self.tables.items():
            body = df.to_string(index=False, float_format=lambda v: self.float_format.format(v))
            blocks.append(f"== {self.name}: {title} ==\n{body}")
        return "\n\n".join(blocks)


def _records_for(dataset: Dataset, n: int) -> Sequence[GraphRecord]:
    records = dataset.get(n, ())
    if not records:
        raise MissingSizeError(f"no records for n={n} in the dataset")
    return records


def _parity(n: int) -> str:
    return "even" if n % 2 == 0 else "odd"


def _degree_label(records: Sequence[GraphRecord]) -> str:
    ks = sorted({r.k for r in records})
    if ks == list(range(ks[0], ks[-1] + 1)):
        return f"{ks[0]}-{ks[-1]}" if len(ks) > 1 else str(ks[0])
    return ",".join(str(k) for k in ks)


# ──────────────────────────────────────────────────────────────
# Bound deviations
# ──────────────────────────────────────────────────────────────


def table1_report(dataset: Dataset, sizes: Sequence[int]) -> ReportTable:
    """Mean relative deviation of the spectral lower bound and the combined
    upper bound from the exact h, per graph size."""

    rows = []
    for n in sizes:
        records = _records_for(dataset, n)
        lower_dev = []
        upper_dev = []
        for r in records:
            b = bounds(r.k, r.n, r.lambda1)
            lower_dev.append(deviation(b.lower, r.h))
            upper_dev.append(deviation(b.upper, r.h))
        mean_lower, std_lower = mean_std(lower_dev)
        mean_upper, std_upper = mean_std(upper_dev)
        rows.append(
            {
                "n": n,
                "records": len(records),
                "degrees": _degree_label(records),
                "mean_dh_lower": mean_lower,
                "std_dh_lower": std_lower,
                "mean_dh_upper": mean_upper,
                "std_dh_upper": std_upper,
            }
        )

    df = pd.DataFrame(rows)
    chart = ChartSpec(
        name="table1_bound_deviation",
        kind="bar",
        data=df[["n", "mean_dh_lower", "mean_dh_upper"]],
        x="n",
        ys=("mean_dh_lower", "mean_dh_upper"),
        title="Mean deviation of spectral bounds from h(G)",
        xlabel="n",
        ylabel="mean relative deviation",
    )
    return ReportTable(name="table1", tables={"bounds": df}, charts=[chart], float_format="{:.2f}")


# ──────────────────────────────────────────────────────────────
# Linear regression on the top eigenvalues
# ──────────────────────────────────────────────────────────────


def _linear_data(records: Sequence[GraphRecord], m: int) -> list[tuple[tuple[float, ...], float]]:
    return [(r.inputs(m), r.h) for r in records]


def _linear_deviations(model: LinearModel, records: Sequence[GraphRecord]) -> list[float]:
    return [deviation(predict_linear(model, r.inputs(model.m)), r.h) for r in records]


def regression_experiment(
    dataset: Dataset,
    m_values: Sequence[int],
    train_sizes: Sequence[int],
    predict_sizes: Sequence[int],
    gap_bins: int = DEFAULT_GAP_BINS,
) -> ReportTable:
    """In-sample fits per (n, m), fitted coefficients per n, cross-size
    prediction split by target parity, and deviation per spectral-gap bin."""

    for m in m_values:
        if not 1 <= m <= MAX_EIGS:
            raise InvalidParametersError(f"m={m} outside 1..{MAX_EIGS}")
    sizes = sorted(set(train_sizes) | set(predict_sizes))
    if not sizes:
        raise InvalidParametersError("regression_experiment needs at least one size")
    for n in sizes:
        _records_for(dataset, n)

    in_sample_rows = []
    coeff_rows = []
    gap_rows = []
    for n in sizes:
        records = dataset[n]
        for m in m_values:
            model = fit_linear(_linear_data(records, m))
            mean, std = mean_std(_linear_deviations(model, records))
            in_sample_rows.append({"n": n, "m": m, "records": len(records), "mean_dh": mean, "std_dh": std})

        model2 = fit_linear(_linear_data(records, 2))
        a, b = model2.coeffs
        coeff_rows.append({"n": n, "a": a, "b": b, "c": model2.intercept})

        devs = _linear_deviations(model2, records)
        for lo, hi, mean, count in deviation_by_gap([r.gap for r in records], devs, gap_bins):
            gap_rows.append({"n": n, "gap_lo": lo, "gap_hi": hi, "mean_dh": mean, "records": count})

    prediction_rows = []
    for train_n in train_sizes:
        model = fit_linear(_linear_data(dataset[train_n], 2))
        for target in predict_sizes:
            if target == train_n:
                continue
            mean, std = mean_std(_linear_deviations(model, dataset[target]))
            prediction_rows.append(
                {
                    "train_n": train_n,
                    "target_n": target,
                    "target_parity": _parity(target),
                    "same_parity": _parity(target) == _parity(train_n),
                    "mean_dh": mean,
                    "std_dh": std,
                }
            )

    in_sample = pd.DataFrame(in_sample_rows)
    coeffs = pd.DataFrame(coeff_rows)
    prediction = pd.DataFrame(
        prediction_rows,
        columns=["train_n", "target_n", "target_parity", "same_parity", "mean_dh", "std_dh"],
    )
    gap = pd.DataFrame(gap_rows)
    if prediction.empty:
        parity_summary = pd.DataFrame(columns=["train_n", "target_parity", "mean_dh", "targets"])
    else:
        parity_summary = (
            prediction.groupby(["train_n", "target_parity"], sort=True)["mean_dh"]
            .agg(["mean", "count"])
            .reset_index()
            .rename(columns={"mean": "mean_dh", "count": "targets"})
        )

    charts = [
        ChartSpec(
            name="regression_in_sample",
            kind="line",
            data=_pivot(in_sample, "n", "m", "mean_dh", prefix="m"),
            x="n",
            ys=tuple(f"m{m}" for m in m_values),
            title="In-sample deviation of the linear estimator",
            xlabel="n",
            ylabel="mean relative deviation",
        ),
        ChartSpec(
            name="regression_coefficients",
            kind="line",
            data=coeffs[["n", "a", "b"]],
            x="n",
            ys=("a", "b"),
            title="Fitted coefficients of lambda0 and lambda1",
            xlabel="n",
            ylabel="coefficient",
            reference_lines=(REFERENCE_A, REFERENCE_B),
        ),
        ChartSpec(
            name="regression_prediction",
            kind="line",
            data=_pivot(prediction, "target_n", "train_n", "mean_dh", prefix="train_n"),
            x="target_n",
            ys=tuple(f"train_n{n}" for n in train_sizes),
            title="Cross-size prediction by the linear estimator",
            xlabel="target n",
            ylabel="mean relative deviation",
        ),
    ]
    if not gap.empty:
        largest = gap[gap["n"] == gap["n"].max()].assign(gap_mid=lambda d: (d["gap_lo"] + d["gap_hi"]) / 2.0)
        charts.append(
            ChartSpec(
                name="regression_gap_bins",
                kind="line",
                data=largest[["gap_mid", "mean_dh"]].reset_index(drop=True),
                x="gap_mid",
                ys=("mean_dh",),
                title=f"Linear-estimator deviation by spectral gap (n={int(largest['n'].iloc[0])})",
                xlabel="spectral gap k - lambda1",
                ylabel="mean relative deviation",
            )
        )

    return ReportTable(
        name="regression",
        tables={
            "in_sample": in_sample,
            "coefficients": coeffs,
            "prediction": prediction,
            "parity_summary": parity_summary,
            "gap_bins": gap,
        },
        charts=charts,
    )


def _pivot(df: pd.DataFrame, index: str, columns: str, values: str, prefix: str) -> pd.DataFrame:
    if df.empty:
        return pd.DataFrame(columns=[index])
    wide = df.pivot(index=index, columns=columns, values=values)
    wide.columns = [f"{prefix}{c}" for c in wide.columns]
    return wide.reset_index()


# ──────────────────────────────────────────────────────────────
# Neural estimator
# ──────────────────────────────────────────────────────────────


def _train_config(regime: str, seed: Seed) -> TrainConfig:
    if regime == "full":
        return TrainConfig.full(seed)
    if regime == "moderate":
        return TrainConfig.moderate(seed)
    raise InvalidParametersError(f"regime must be 'moderate' or 'full', got {regime!r}")


def _eigs_label(eigs: int) -> str:
    return "all" if eigs == 0 else str(eigs)


def train_selected(
    records: Sequence[GraphRecord],
    eigs: int,
    regime: str,
    trainings: int,
    master_seed: int,
) -> tuple[MlpModel, TrainReport]:
    """Train `trainings` candidates on independent seeds and keep the best on validation."""

    if trainings < 1:
        raise InvalidParametersError(f"trainings must be >= 1, got {trainings}")
    n = records[0].n
    data = [(r.inputs(eigs), r.h) for r in records]
    candidates = []
    for t in range(trainings):
        seed = Seed(master_seed, (n << 20) | (eigs << 12) | t)
        candidates.append(train(data, _train_config(regime, seed)))
    best = model_select(candidates)
    report = next(rep for model, rep in candidates if model is best)
    return best, report


def _mlp_deviations(model: MlpModel, records: Sequence[GraphRecord], eigs: int) -> list[float]:
    x = np.asarray([r.inputs(eigs) for r in records], dtype=np.float64)
    out = mlp_predict(model, x)
    return [deviation(float(est), r.h) for est, r in zip(out, records)]


def dnn_experiment(
    dataset: Dataset,
    train_sizes: Sequence[int],
    predict_sizes: Sequence[int],
    regime: str,
    trainings: int = 3,
    eigs: Sequence[int] = (2,),
    master_seed: int = 7,
) -> ReportTable:
    """Select an MLP per (train size, input arity) and score it in-sample
    and on other sizes, next to the linear estimator with the same inputs.

    Full-spectrum inputs (eigs=0) depend on n and are only scored in-sample.
    """

    _train_config(regime, Seed(master_seed))
    if not train_sizes or not eigs:
        raise InvalidParametersError("dnn_experiment needs at least one train size and one input arity")
    for n in (*train_sizes, *predict_sizes):
        _records_for(dataset, n)

    in_sample_rows = []
    prediction_rows = []
    charts: list[ChartSpec] = []
    for e in eigs:
        label = _eigs_label(e)
        for train_n in train_sizes:
            records = dataset[train_n]
            model, report = train_selected(records, e, regime, trainings, master_seed)
            lr_mean = math.nan
            lr_model = None
            if 1 <= e <= MAX_EIGS:
                lr_model = fit_linear(_linear_data(records, e))
                lr_mean = mean_std(_linear_deviations(lr_model, records))[0]
            in_sample_rows.append(
                {
                    "train_n": train_n,
                    "eigs": label,
                    "regime": regime,
                    "trainings": trainings,
                    "epochs_run": report.epochs_run,
                    "mean_dh_train": report.mean_dev_train,
                    "std_dh_train": report.std_dev_train,
                    "mean_dh_val": report.mean_dev_val,
                    "std_dh_val": report.std_dev_val,
                    "lr_mean_dh": lr_mean,
                }
            )
            hist = pd.DataFrame(
                {
                    "split": ["train"] * len(report.train_deviations) + ["validation"] * len(report.val_deviations),
                    "deviation": [*report.train_deviations, *report.val_deviations],
                }
            )
            charts.append(
                ChartSpec(
                    name=f"dnn_histogram_n{train_n}_eigs{label}",
                    kind="hist",
                    data=hist,
                    x="deviation",
                    group="split",
                    bin_width=HISTOGRAM_BIN,
                    title=f"MLP deviation histogram, n={train_n}, inputs={label}",
                    xlabel="relative deviation",
                    ylabel="graphs",
                )
            )

            if e == 0:
                continue
            for target in predict_sizes:
                if target == train_n:
                    continue
                mean, std = mean_std(_mlp_deviations(model, dataset[target], e))
                lr_mean_t = lr_std_t = math.nan
                if lr_model is not None:
                    lr_mean_t, lr_std_t = mean_std(_linear_deviations(lr_model, dataset[target]))
                prediction_rows.append(
                    {
                        "train_n": train_n,
                        "eigs": label,
                        "target_n": target,
                        "target_parity": _parity(target),
                        "mean_dh": mean,
                        "std_dh": std,
                        "lr_mean_dh": lr_mean_t,
                        "lr_std_dh": lr_std_t,
                    }
                )
            logger.info(
                f"dnn n={train_n} eigs={label}: val mean dev {report.mean_dev_val:.4f} "
                f"(linear {lr_mean:.4f})"
            )

    in_sample = pd.DataFrame(in_sample_rows)
    prediction = pd.DataFrame(
        prediction_rows,
        columns=["train_n", "eigs", "target_n", "target_parity", "mean_dh", "std_dh", "lr_mean_dh", "lr_std_dh"],
    )

    for label in dict.fromkeys(in_sample["eigs"]):
        part = in_sample[in_sample["eigs"] == label]
        charts.append(
            ChartSpec(
                name=f"dnn_in_sample_eigs{label}",
                kind="line",
                data=part[["train_n", "mean_dh_train", "std_dh_train", "mean_dh_val", "std_dh_val"]],
                x="train_n",
                ys=("mean_dh_train", "std_dh_train", "mean_dh_val", "std_dh_val"),
                title=f"MLP training and validation deviation, inputs={label}",
                xlabel="n",
                ylabel="relative deviation",
            )
        )
    if len(eigs) > 1:
        charts.append(
            ChartSpec(
                name="dnn_eigs_comparison",
                kind="bar",
                data=_pivot(in_sample, "train_n", "eigs", "mean_dh_val", prefix="eigs"),
                x="train_n",
                ys=tuple(f"eigs{_eigs_label(e)}" for e in eigs),
                title="Validation deviation by number of input eigenvalues",
                xlabel="n",
                ylabel="mean relative deviation",
            )
        )
    for (train_n, label), part in prediction.groupby(["train_n", "eigs"], sort=True):
        charts.append(
            ChartSpec(
                name=f"dnn_vs_linear_n{train_n}_eigs{label}",
                kind="line",
                data=part[["target_n", "mean_dh", "lr_mean_dh"]].reset_index(drop=True),
                x="target_n",
                ys=("mean_dh", "lr_mean_dh"),
                title=f"MLP vs linear prediction, trained on n={train_n}",
                xlabel="target n",
                ylabel="mean relative deviation",
            )
        )
        charts.append(
            ChartSpec(
                name=f"dnn_prediction_n{train_n}_eigs{label}",
                kind="line",
                data=part[["target_n", "mean_dh", "std_dh"]].reset_index(drop=True),
                x="target_n",
                ys=("mean_dh", "std_dh"),
                title=f"MLP prediction mean and spread, trained on n={train_n}",
                xlabel="target n",
                ylabel="relative deviation",
            )
        )

    return ReportTable(
        name="dnn",
        tables={"in_sample": in_sample, "prediction": prediction},
        charts=charts,
    )
