from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Any, Callable, Sequence

# Ensure repository root is importable when running this file directly.
REPO_ROOT = Path(__file__).resolve().parents[1]
if str(REPO_ROOT) not in sys.path:
    sys.path.insert(0, str(REPO_ROOT))

from dotenv import load_dotenv  # noqa: E402

from cheeger_lab.cheeger import cheeger_exact  # noqa: E402
from cheeger_lab.errors import CheegerLabError, InvalidParametersError  # noqa: E402
from cheeger_lab.estimators import (  # noqa: E402
    bounds,
    fit_linear,
    is_linear_model_file,
    load_linear,
    predict_linear,
    save_linear,
)
from cheeger_lab.graph import Seed, generate_regular, read_edge_list  # noqa: E402
from cheeger_lab.neural import (  # noqa: E402
    TrainConfig,
    is_mlp_file,
    load_mlp,
    mlp_predict,
    save_mlp,
    train,
)
from cheeger_lab.research.charts import emit_charts  # noqa: E402
from cheeger_lab.research.config import (  # noqa: E402
    ExperimentConfig,
    config_from_dict,
    config_to_dict,
    load_config,
    resolve_output_root,
)
from cheeger_lab.research.dataset import (  # noqa: E402
    build_dataset,
    export_csv,
    group_by_size,
    load_records,
)
from cheeger_lab.research.reports import dnn_experiment, regression_experiment, table1_report  # noqa: E402
from cheeger_lab.research.verify import run_verify  # noqa: E402
from cheeger_lab.spectral import spectrum  # noqa: E402
from shared.logging import configure_logging, log_run  # noqa: E402

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
RUN_LOG = "runs.jsonl"


class UsageError(Exception):
    """Bad command line; reported with exit status 1."""


class _Parser(argparse.ArgumentParser):
    # Raise instead of printing usage and exiting with status 2.
    def error(self, message: str) -> None:  # type: ignore[override]
        raise UsageError(f"{self.prog}: {message}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.replace(",", " ").split()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _eigs(text: str) -> int:
    if text == "all":
        return 0
    try:
        value = int(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"--eigs takes an integer or 'all', got {text!r}") from exc
    if value < 1:
        raise argparse.ArgumentTypeError(f"--eigs must be >= 1, got {value}")
    return value


def _eigs_list(text: str) -> list[int]:
    return [_eigs(part) for part in text.replace(",", " ").split()]


def _add_seed(p: argparse.ArgumentParser, default: int = 7) -> None:
    p.add_argument("--seed", type=int, default=default, help=f"Master seed (default {default}).")


def _add_out(p: argparse.ArgumentParser) -> None:
    p.add_argument(
        "--out",
        type=str,
        default=None,
        help="Output root. Defaults to the config's output_dir, then CHEEGER_LAB_DIR, then ./cheeger_lab_runs.",
    )


def _add_dataset(p: argparse.ArgumentParser, required: bool = True) -> None:
    p.add_argument(
        "--dataset",
        type=str,
        nargs="+",
        required=required,
        help="records_n<N>.jsonl files or dataset directories.",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cheeger-lab", description="Exact, spectral and learned estimates of Cheeger constants.")
    parser.add_argument("--log-level", type=str, default="INFO", help="Logging level (default INFO).")
    parser.add_argument("--log-file", type=str, default=None, help="Optional log file path.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="Build or top up the graph dataset.")
    p.add_argument("--config", type=str, default=None, help="JSON ExperimentConfig preset.")
    p.add_argument("--sizes", type=_int_list, default=None, help="Graph sizes, e.g. 12,13,14.")
    p.add_argument("--n", type=int, default=None, help="Single graph size (alternative to --sizes).")
    p.add_argument("--k", type=_int_list, default=None, help="Degrees to use for every size.")
    p.add_argument("--count", type=int, default=None, help="Records per size, split across degrees.")
    p.add_argument("--threads", type=int, default=None, help="Parallel workers for generation.")
    p.add_argument("--format", choices=("json", "csv"), default="json", help="Also export CSV when 'csv'.")
    p.add_argument("--seed", type=int, default=None, help="Master seed (default from config, 7).")
    _add_out(p)

    p = sub.add_parser("solve", help="Exact Cheeger constant of one graph.")
    p.add_argument("--graph", type=str, default=None, help="Edge-list file, one 'u v' pair per line.")
    p.add_argument("--n", type=int, default=None, help="Vertices of a generated graph.")
    p.add_argument("--k", type=int, default=None, help="Degree of a generated graph.")
    p.add_argument("--threads", type=int, default=1, help="Parallel workers for the subset walk.")
    p.add_argument("--format", choices=("json", "text"), default="text", help="Output format.")
    _add_seed(p)

    p = sub.add_parser("spectrum", help="Adjacency eigenvalues of one graph.")
    p.add_argument("--graph", type=str, default=None, help="Edge-list file, one 'u v' pair per line.")
    p.add_argument("--n", type=int, default=None, help="Vertices of a generated graph.")
    p.add_argument("--k", type=int, default=None, help="Degree of a generated graph.")
    p.add_argument("--format", choices=("json", "text"), default="text", help="Output format.")
    _add_seed(p)

    p = sub.add_parser("bounds", help="Spectral bounds on h from (k, n, lambda1).")
    p.add_argument("--k", type=int, required=True, help="Degree.")
    p.add_argument("--n", type=int, required=True, help="Vertices.")
    p.add_argument("--lambda1", type=float, required=True, help="Second-largest adjacency eigenvalue.")
    p.add_argument("--format", choices=("json", "text"), default="text", help="Output format.")

    p = sub.add_parser("fit", help="Fit the linear estimator on the top eigenvalues.")
    _add_dataset(p)
    p.add_argument("--eigs", type=int, choices=range(1, 5), default=2, help="Number of top eigenvalues m (1..4).")
    p.add_argument("--model", type=str, required=True, help="Output model file.")
    _add_out(p)

    p = sub.add_parser("train", help="Train the neural estimator.")
    _add_dataset(p)
    p.add_argument("--eigs", type=_eigs, default=2, help="Input eigenvalues: an integer or 'all'.")
    p.add_argument("--model", type=str, required=True, help="Output model file; a .report.json is written beside it.")
    p.add_argument("--regime", choices=("moderate", "full"), default="full", help="Training regime.")
    p.add_argument("--epochs", type=int, default=None, help="Override the regime's epoch count.")
    _add_seed(p)
    _add_out(p)

    p = sub.add_parser("predict", help="Estimate h for a dataset with a saved model.")
    _add_dataset(p)
    p.add_argument("--model", type=str, required=True, help="Linear or MLP model file.")
    p.add_argument("--eigs", type=_eigs, default=None, help="MLP input eigenvalues (defaults to the model's arity).")
    p.add_argument("--format", choices=("json", "csv"), default="csv", help="Output format on stdout.")

    p = sub.add_parser("report", help="Reproduce the bound, regression and neural-network tables and charts.")
    p.add_argument("--config", type=str, default=None, help="JSON ExperimentConfig preset.")
    _add_dataset(p, required=False)
    p.add_argument("--kind", choices=("table1", "regression", "dnn", "all"), default="table1", help="Report to run.")
    p.add_argument("--sizes", type=_int_list, default=None, help="Sizes for the bound table.")
    p.add_argument("--train-sizes", type=_int_list, default=None, help="Training sizes.")
    p.add_argument("--predict-sizes", type=_int_list, default=None, help="Prediction sizes.")
    p.add_argument("--eigs", type=_eigs_list, default=None, help="Input arities for the network, e.g. 2,4,all.")
    p.add_argument("--regime", choices=("moderate", "full"), default=None, help="Training regime.")
    p.add_argument("--trainings", type=int, default=None, help="Candidate trainings per size.")
    p.add_argument("--seed", type=int, default=None, help="Master seed (default from config, 7).")
    _add_out(p)

    p = sub.add_parser("verify", help="Oracle-equivalence and invariant checks.")
    p.add_argument("--max-n", type=int, default=12, help="Largest graph size in the oracle sweep.")
    p.add_argument("--samples", type=int, default=200, help="Random graphs in the oracle sweep.")
    _add_seed(p)
    return parser


def _require_positive(name: str, value: int | None) -> None:
    if value is not None and value < 1:
        raise UsageError(f"{name} must be >= 1, got {value}")


def _graph_from_args(args: argparse.Namespace):
    if args.graph:
        if args.n is not None or args.k is not None:
            raise UsageError("--graph cannot be combined with --n/--k")
        return read_edge_list(Path(args.graph))
    if args.n is None or args.k is None:
        raise UsageError("give either --graph or both --n and --k")
    return generate_regular(args.n, args.k, Seed(args.seed))


def _emit(payload: Any, fmt: str, text: str) -> None:
    print(json.dumps(payload, indent=2) if fmt == "json" else text)


def _records_from(paths: Sequence[str]):
    records = load_records([Path(p) for p in paths])
    if not records:
        raise InvalidParametersError(f"no records found in {', '.join(paths)}")
    return records


def cmd_generate(args: argparse.Namespace) -> dict[str, Any]:
    cfg = load_config(Path(args.config)) if args.config else ExperimentConfig()
    overrides: dict[str, Any] = {}
    if args.sizes is not None and args.n is not None:
        raise UsageError("use --sizes or --n, not both")
    sizes = args.sizes if args.sizes is not None else ([args.n] if args.n is not None else None)
    _require_positive("--count", args.count)
    _require_positive("--threads", args.threads)
    if sizes is not None:
        overrides["sizes"] = sizes
    active = overrides.get("sizes", cfg.sizes)
    if args.k is not None:
        overrides["degrees"] = {n: args.k for n in active}
    if args.count is not None:
        overrides["counts"] = {n: args.count for n in active}
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    cfg = config_from_dict(overrides, base_cfg=cfg)
    cfg.validate()

    root = resolve_output_root(args.out, cfg)
    paths = build_dataset(cfg, root / "dataset")
    outputs = [str(p) for p in paths]
    if args.format == "csv":
        csv_path = export_csv(load_records(paths), root / "dataset" / "records.csv")
        outputs.append(str(csv_path))
    for p in outputs:
        print(p)
    return {"root": root, "config": config_to_dict(cfg), "outputs": outputs, "summary": {"files": len(paths)}}


def cmd_solve(args: argparse.Namespace) -> None:
    _require_positive("--threads", args.threads)
    g = _graph_from_args(args)
    result = cheeger_exact(g, workers=args.threads)
    payload = {
        "n": g.n,
        "k": g.k,
        "h": result.h,
        "numerator": result.numerator,
        "denominator": result.denominator,
        "witness": list(result.witness),
    }
    _emit(payload, args.format, f"h = {result.fraction} (= {result.numerator}/{result.denominator})")


def cmd_spectrum(args: argparse.Namespace) -> None:
    g = _graph_from_args(args)
    values = spectrum(g).values
    _emit({"n": g.n, "k": g.k, "spectrum": list(values)}, args.format, "\n".join(f"{v:.12g}" for v in values))


def cmd_bounds(args: argparse.Namespace) -> None:
    b = bounds(args.k, args.n, args.lambda1)
    rows = [
        ("lower", b.lower),
        ("upper_gap", b.upper_gap),
        ("upper_mohar_size", b.upper_mohar_size),
        ("upper_mohar_spec", b.upper_mohar_spec),
        ("upper", b.upper),
    ]
    _emit(dict(rows), args.format, "\n".join(f"{name:<17} {value:.12g}" for name, value in rows))


def cmd_fit(args: argparse.Namespace) -> dict[str, Any]:
    records = _records_from(args.dataset)
    model = fit_linear([(r.inputs(args.eigs), r.h) for r in records])
    save_linear(model, Path(args.model))
    print(f"coeffs = {' '.join(f'{c:.6g}' for c in model.coeffs)}, intercept = {model.intercept:.6g}")
    return {
        "root": resolve_output_root(args.out),
        "config": {"dataset": args.dataset, "eigs": args.eigs},
        "outputs": [args.model],
        "summary": {"records": len(records), "coeffs": list(model.coeffs), "intercept": model.intercept},
    }


def cmd_train(args: argparse.Namespace) -> dict[str, Any]:
    records = _records_from(args.dataset)
    _require_positive("--epochs", args.epochs)
    overrides = {"epochs": args.epochs} if args.epochs is not None else {}
    seed = Seed(args.seed)
    config = TrainConfig.full(seed, **overrides) if args.regime == "full" else TrainConfig.moderate(seed, **overrides)
    model, report = train([(r.inputs(args.eigs), r.h) for r in records], config)

    model_path = Path(args.model)
    save_mlp(model, model_path)
    report_path = model_path.with_name(model_path.name + ".report.json")
    report_path.write_text(json.dumps(report.to_dict(), indent=2) + "\n", encoding="utf-8")
    print(f"mean deviation train={report.mean_dev_train:.4f} val={report.mean_dev_val:.4f}")
    return {
        "root": resolve_output_root(args.out),
        "config": {"dataset": args.dataset, "eigs": args.eigs, "regime": args.regime, "seed": args.seed},
        "outputs": [str(model_path), str(report_path)],
        "summary": {"mean_dev_train": report.mean_dev_train, "mean_dev_val": report.mean_dev_val},
    }


def cmd_predict(args: argparse.Namespace) -> None:
    records = _records_from(args.dataset)
    path = Path(args.model)
    if is_linear_model_file(path):
        model = load_linear(path)
        estimates = [predict_linear(model, r.inputs(model.m)) for r in records]
    elif is_mlp_file(path):
        mlp = load_mlp(path)
        eigs = args.eigs if args.eigs is not None else mlp.input_dim
        estimates = [float(v) for v in mlp_predict(mlp, [r.inputs(eigs) for r in records])]
    else:
        raise InvalidParametersError(f"{path} is neither a linear nor an MLP model file")

    rows = [{"n": r.n, "k": r.k, "index": r.index, "h": r.h, "h_est": est} for r, est in zip(records, estimates)]
    if args.format == "json":
        print(json.dumps(rows, indent=2))
    else:
        print("n,k,index,h,h_est")
        for row in rows:
            print(f"{row['n']},{row['k']},{row['index']},{row['h']!r},{row['h_est']!r}")


def cmd_report(args: argparse.Namespace) -> dict[str, Any]:
    cfg = load_config(Path(args.config)) if args.config else ExperimentConfig()
    overrides: dict[str, Any] = {}
    for flag, key in (
        ("sizes", "sizes"),
        ("train_sizes", "train_sizes"),
        ("predict_sizes", "predict_sizes"),
        ("eigs", "dnn_eigs"),
        ("regime", "dnn_regime"),
        ("trainings", "dnn_trainings"),
        ("seed", "master_seed"),
    ):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    cfg = config_from_dict(overrides, base_cfg=cfg)
    cfg.validate()

    root = resolve_output_root(args.out, cfg)
    dataset_paths = [Path(p) for p in args.dataset] if args.dataset else [root / "dataset"]
    dataset = group_by_size(load_records(dataset_paths))

    reports = []
    if args.kind in ("table1", "all"):
        reports.append(table1_report(dataset, cfg.sizes))
    if args.kind in ("regression", "all"):
        reports.append(regression_experiment(dataset, cfg.m_values, cfg.train_sizes, cfg.predict_sizes))
    if args.kind in ("dnn", "all"):
        reports.append(
            dnn_experiment(
                dataset,
                cfg.train_sizes,
                cfg.predict_sizes,
                cfg.dnn_regime,
                trainings=cfg.dnn_trainings,
                eigs=cfg.dnn_eigs,
                master_seed=cfg.master_seed,
            )
        )

    outputs: list[str] = []
    for report in reports:
        print(report.to_text())
        print()
        outputs.extend(str(p) for p in emit_charts(report, root / "reports" / report.name))
    return {
        "root": root,
        "config": {**config_to_dict(cfg), "kind": args.kind},
        "outputs": outputs,
        "summary": {"reports": [r.name for r in reports]},
    }


def cmd_verify(args: argparse.Namespace) -> int:
    result = run_verify(max_n=args.max_n, samples=args.samples, master_seed=args.seed)
    for check in result.checks:
        print(f"{'ok  ' if check.ok else 'FAIL'} {check.name} {check.detail}".rstrip())
    return EXIT_OK if result.passed else EXIT_DATA


COMMANDS: dict[str, Callable[[argparse.Namespace], Any]] = {
    "generate": cmd_generate,
    "solve": cmd_solve,
    "spectrum": cmd_spectrum,
    "bounds": cmd_bounds,
    "fit": cmd_fit,
    "train": cmd_train,
    "predict": cmd_predict,
    "report": cmd_report,
    "verify": cmd_verify,
}
LOGGED_COMMANDS = {"generate", "fit", "train", "report"}


def run(argv: Sequence[str] | None = None) -> int:
    """Parse argv, dispatch one command and map failures to exit codes."""

    load_dotenv(REPO_ROOT / ".env")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        # --help and --version exit through argparse.
        return int(exc.code or 0)

    level = getattr(logging, str(args.log_level).upper(), None)
    if not isinstance(level, int):
        print(f"error: unknown --log-level {args.log_level!r}", file=sys.stderr)
        return EXIT_USAGE
    configure_logging(Path(args.log_file) if args.log_file else None, level)

    try:
        outcome = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (CheegerLabError, OSError) as exc:
        logger.error(f"{args.command} failed: {exc}")
        print(f"error: {exc}", file=sys.stderr)
        if args.command in LOGGED_COMMANDS:
            log_run(
                resolve_output_root(getattr(args, "out", None)) / RUN_LOG,
                args.command,
                {k: v for k, v in vars(args).items() if k != "command"},
                error=str(exc),
            )
        return EXIT_DATA

    if isinstance(outcome, int):
        return outcome
    if isinstance(outcome, dict) and args.command in LOGGED_COMMANDS:
        log_run(
            Path(outcome["root"]) / RUN_LOG,
            args.command,
            outcome["config"],
            outputs=outcome["outputs"],
            summary=outcome["summary"],
        )
    return EXIT_OK


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
