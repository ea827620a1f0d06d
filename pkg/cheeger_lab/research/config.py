from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

from cheeger_lab.errors import InvalidParametersError
from cheeger_lab.graph import MAX_VERTICES, check_parameters

DEFAULT_OUTPUT_ROOT = Path("cheeger_lab_runs")
OUTPUT_ROOT_ENV = "CHEEGER_LAB_DIR"
CONFIG_DIR = Path(__file__).resolve().parent / "configs"


def default_degrees(n: int) -> list[int]:
    # k in 3..min(8, n-2), keeping only degrees with n*k even.
    return [k for k in range(3, min(8, n - 2) + 1) if (n * k) % 2 == 0]


def default_count(n: int) -> int:
    if n <= 20:
        return 2000
    if n <= 26:
        return 300
    return 100


@dataclass(frozen=True)
class ExperimentConfig:
    """Dataset and report settings; JSON presets live in research/configs/."""

    sizes: tuple[int, ...] = (12,)
    # Per-n overrides; sizes without an entry use default_degrees / default_count.
    degrees: dict[int, tuple[int, ...]] = field(default_factory=dict)
    counts: dict[int, int] = field(default_factory=dict)
    master_seed: int = 7
    output_dir: str = ""
    threads: int = 1

    m_values: tuple[int, ...] = (1, 2, 3, 4)
    train_sizes: tuple[int, ...] = ()
    predict_sizes: tuple[int, ...] = ()
    dnn_regime: str = "moderate"
    dnn_trainings: int = 3
    dnn_eigs: tuple[int, ...] = (2,)

    def degrees_for(self, n: int) -> list[int]:
        return list(self.degrees.get(n, default_degrees(n)))

    def count_for(self, n: int) -> int:
        return int(self.counts.get(n, default_count(n)))

    def validate(self) -> None:
        if not self.sizes:
            raise InvalidParametersError("config lists no sizes")
        for n in self.sizes:
            if n > MAX_VERTICES:
                raise InvalidParametersError(f"n={n} exceeds {MAX_VERTICES}")
            degrees = self.degrees_for(n)
            if not degrees:
                raise InvalidParametersError(f"no admissible degree for n={n}")
            for k in degrees:
                check_parameters(n, k)
            if self.count_for(n) < 1:
                raise InvalidParametersError(f"count for n={n} must be >= 1")
        if self.threads < 1:
            raise InvalidParametersError(f"threads must be >= 1, got {self.threads}")
        if self.dnn_regime not in ("moderate", "full"):
            raise InvalidParametersError(f"dnn_regime must be 'moderate' or 'full', got {self.dnn_regime!r}")
        if self.dnn_trainings < 1:
            raise InvalidParametersError("dnn_trainings must be >= 1")


def config_to_dict(cfg: ExperimentConfig) -> dict[str, Any]:
    payload = asdict(cfg)
    # JSON object keys are strings.
    payload["degrees"] = {str(n): list(ks) for n, ks in sorted(cfg.degrees.items())}
    payload["counts"] = {str(n): c for n, c in sorted(cfg.counts.items())}
    for key in ("sizes", "m_values", "train_sizes", "predict_sizes", "dnn_eigs"):
        payload[key] = list(payload[key])
    return payload


def config_from_dict(params: dict[str, Any], base_cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    # Keep unknown keys out so one stray field does not break the run.
    allowed = {f.name for f in fields(ExperimentConfig)}
    merged: dict[str, Any] = asdict(base_cfg) if base_cfg is not None else {}
    merged.update({k: v for k, v in params.items() if k in allowed})

    for key in ("sizes", "m_values", "train_sizes", "predict_sizes", "dnn_eigs"):
        if key in merged:
            merged[key] = tuple(int(v) for v in merged[key])
    if "degrees" in merged:
        merged["degrees"] = {int(n): tuple(int(k) for k in ks) for n, ks in merged["degrees"].items()}
    if "counts" in merged:
        merged["counts"] = {int(n): int(c) for n, c in merged["counts"].items()}
    return ExperimentConfig(**merged)


def load_config(path: Path, base_cfg: ExperimentConfig | None = None) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidParametersError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise InvalidParametersError(f"{path} must contain a JSON object")
    try:
        return config_from_dict(raw, base_cfg=base_cfg)
    except (TypeError, ValueError, AttributeError) as exc:
        raise InvalidParametersError(f"{path}: bad config value ({exc})") from exc


def resolve_output_root(cli_out: str | None = None, cfg: ExperimentConfig | None = None) -> Path:
    """Priority: explicit --out, then the config's output_dir, then CHEEGER_LAB_DIR, then ./cheeger_lab_runs."""

    if cli_out:
        return Path(cli_out)
    if cfg is not None and cfg.output_dir:
        return Path(cfg.output_dir)
    env_dir = os.getenv(OUTPUT_ROOT_ENV)
    if env_dir:
        return Path(env_dir)
    return DEFAULT_OUTPUT_ROOT
