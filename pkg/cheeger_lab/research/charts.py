from __future__ import annotations

import json
import logging
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from cheeger_lab.errors import InvalidParametersError  # noqa: E402
from cheeger_lab.research.reports import ChartSpec, ReportTable  # noqa: E402
from shared.types import ChartManifestDict  # noqa: E402

logger = logging.getLogger(__name__)

# Fixed salt and no date metadata keep the SVG bytes stable across runs.
plt.rcParams["svg.hashsalt"] = "cheeger-lab"
SVG_METADATA = {"Date": None}
CSV_FLOAT_FORMAT = "%.10g"
DEFAULT_BIN_WIDTH = 0.005


def histogram_edges(values: np.ndarray, width: float) -> np.ndarray:
    """Bin edges 0, width, 2*width, ... covering max(values)."""
    if width <= 0:
        raise InvalidParametersError(f"bin width must be positive, got {width}")
    top = float(np.max(values)) if np.size(values) else 0.0
    bins = max(1, math.ceil(round(top / width, 9)))
    return np.linspace(0.0, bins * width, bins + 1)


def _series_values(spec: ChartSpec) -> dict[str, np.ndarray]:
    if spec.kind == "hist":
        if spec.data.empty or spec.x not in spec.data:
            return {}
        if spec.group is None:
            return {spec.x: spec.data[spec.x].to_numpy(dtype=float)}
        return {
            str(name): part[spec.x].to_numpy(dtype=float)
            for name, part in spec.data.groupby(spec.group, sort=False)
        }
    return {y: spec.data[y].to_numpy(dtype=float) for y in spec.ys if y in spec.data}


def _is_empty(spec: ChartSpec) -> bool:
    values = _series_values(spec)
    return not values or all(v.size == 0 or not np.any(np.isfinite(v)) for v in values.values())


def _draw(spec: ChartSpec, ax) -> None:
    series = _series_values(spec)
    if spec.kind == "hist":
        finite = np.concatenate([v[np.isfinite(v)] for v in series.values()])
        edges = histogram_edges(finite, spec.bin_width or DEFAULT_BIN_WIDTH)
        for name, values in series.items():
            ax.hist(values[np.isfinite(values)], bins=edges, alpha=0.6, label=name)
    elif spec.kind == "bar":
        x = spec.data[spec.x].to_numpy()
        positions = np.arange(len(x))
        width = 0.8 / max(len(series), 1)
        for i, (name, values) in enumerate(series.items()):
            ax.bar(positions + (i - (len(series) - 1) / 2.0) * width, values, width=width, label=name)
        ax.set_xticks(positions)
        ax.set_xticklabels([str(v) for v in x])
    elif spec.kind == "line":
        x = spec.data[spec.x].to_numpy(dtype=float)
        for name, values in series.items():
            ax.plot(x, values, marker="o", label=name)
    else:
        raise InvalidParametersError(f"unknown chart kind {spec.kind!r}")

    for level in spec.reference_lines:
        ax.axhline(level, color="grey", linestyle="--", linewidth=0.8)
    ax.set_title(spec.title)
    ax.set_xlabel(spec.xlabel)
    ax.set_ylabel(spec.ylabel)
    if len(series) > 1 or spec.kind == "hist":
        ax.legend()


def emit_charts(report: ReportTable, out_dir: Path) -> list[Path]:
    """Write one SVG plus its CSV per chart, a CSV per table and manifest.json.

    Charts whose series are all empty are skipped and listed in the manifest.
    """

    if report.empty:
        raise InvalidParametersError(f"report {report.name!r} has no tables or charts")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written: list[Path] = []
    manifest: ChartManifestDict = {"report": report.name, "charts": [], "tables": [], "skipped": []}

    for title, df in report.tables.items():
        path = out_dir / f"{report.name}_{title}.csv"
        df.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
        manifest["tables"].append(path.name)
        written.append(path)

    for spec in report.charts:
        if _is_empty(spec):
            logger.warning(f"chart {spec.name}: empty series, skipped")
            manifest["skipped"].append(f"{spec.name}: empty series")
            continue
        csv_path = out_dir / f"{spec.name}.csv"
        spec.data.to_csv(csv_path, index=False, float_format=CSV_FLOAT_FORMAT)

        svg_path = out_dir / f"{spec.name}.svg"
        fig, ax = plt.subplots(figsize=(7, 4.5))
        try:
            _draw(spec, ax)
            fig.tight_layout()
            fig.savefig(svg_path, format="svg", metadata=SVG_METADATA)
        finally:
            plt.close(fig)
        manifest["charts"].append(svg_path.name)
        written.extend([svg_path, csv_path])

    manifest_path = out_dir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")
    written.append(manifest_path)
    logger.info(f"report {report.name}: {len(manifest['charts'])} charts, {len(manifest['skipped'])} skipped")
    return written
