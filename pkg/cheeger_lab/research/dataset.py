from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import pandas as pd
from joblib import Parallel, delayed

from cheeger_lab.cheeger import cheeger_exact
from cheeger_lab.errors import CheegerLabError, DataIntegrityError, InvalidParametersError
from cheeger_lab.estimators import bounds
from cheeger_lab.graph import Seed, check_parameters, generate_regular, validate
from cheeger_lab.research.config import ExperimentConfig
from cheeger_lab.spectral import Spectrum, spectrum, spectrum_checks
from shared.record_store import load_jsonl, save_jsonl
from shared.types import GraphRecordDict

logger = logging.getLogger(__name__)

RECORD_GLOB = "records_n*.jsonl"
SANDWICH_SLACK = 1e-9
H_SLACK = 1e-12
CSV_EIGS = 4


def record_stream(n: int, k: int, index: int) -> int:
    """Seed stream for record (n, k, index); disjoint across keys for n <= 64."""
    return (n << 40) | (k << 32) | index


@dataclass(frozen=True)
class GraphRecord:
    n: int
    k: int
    index: int
    seed_master: int
    seed_stream: int
    spectrum: tuple[float, ...]
    h_num: int
    h_den: int
    h: float

    @property
    def key(self) -> tuple[int, int, int]:
        return (self.n, self.k, self.index)

    @property
    def seed(self) -> Seed:
        return Seed(self.seed_master, self.seed_stream)

    @property
    def lambda1(self) -> float:
        return self.spectrum[1]

    @property
    def gap(self) -> float:
        return self.k - self.spectrum[1]

    def inputs(self, eigs: int) -> tuple[float, ...]:
        """Top `eigs` eigenvalues; eigs=0 selects the full spectrum."""
        if eigs == 0:
            return self.spectrum
        if not 1 <= eigs <= self.n:
            raise InvalidParametersError(f"eigs={eigs} outside 0..{self.n} for n={self.n}")
        return self.spectrum[:eigs]

    def to_dict(self) -> GraphRecordDict:
        return {
            "n": self.n,
            "k": self.k,
            "index": self.index,
            "seed_master": self.seed_master,
            "seed_stream": self.seed_stream,
            "spectrum": list(self.spectrum),
            "h_num": self.h_num,
            "h_den": self.h_den,
            "h": self.h,
        }

    @classmethod
    def from_dict(cls, row: Mapping[str, Any]) -> "GraphRecord":
        try:
            return cls(
                n=int(row["n"]),
                k=int(row["k"]),
                index=int(row["index"]),
                seed_master=int(row["seed_master"]),
                seed_stream=int(row["seed_stream"]),
                spectrum=tuple(float(v) for v in row["spectrum"]),
                h_num=int(row["h_num"]),
                h_den=int(row["h_den"]),
                h=float(row["h"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidParametersError(f"malformed record {dict(row)!r}: {exc}") from exc


def check_record(record: GraphRecord) -> list[str]:
    """Invariant violations of a persisted record (empty when it is sound)."""

    problems: list[str] = []
    try:
        check_parameters(record.n, record.k)
    except InvalidParametersError as exc:
        return [f"parameters: {exc}"]
    if len(record.spectrum) != record.n:
        return [f"spectrum: length {len(record.spectrum)} != n = {record.n}"]

    problems.extend(spectrum_checks(Spectrum(record.spectrum), record.k))
    if not 1 <= record.h_den <= record.n // 2:
        problems.append(f"h: witness size {record.h_den} outside 1..{record.n // 2}")
    if record.h_num < 1:
        problems.append(f"h: boundary {record.h_num} must be positive for a connected graph")
    if record.h_den and abs(record.h - record.h_num / record.h_den) > H_SLACK:
        problems.append(f"h: {record.h!r} != {record.h_num}/{record.h_den}")
    if problems:
        return problems

    b = bounds(record.k, record.n, record.lambda1)
    if not b.lower - SANDWICH_SLACK <= record.h <= b.upper + SANDWICH_SLACK:
        problems.append(f"sandwich: h={record.h:.6g} outside [{b.lower:.6g}, {b.upper:.6g}]")
    return problems


def make_record(n: int, k: int, index: int, master: int) -> GraphRecord:
    """Generate, solve and check one record; errors carry the record key."""

    seed = Seed(master, record_stream(n, k, index))
    try:
        g = generate_regular(n, k, seed)
        s = spectrum(g)
        result = cheeger_exact(g)
    except CheegerLabError as exc:
        raise type(exc)(f"record (n={n}, k={k}, index={index}): {exc}") from exc

    record = GraphRecord(
        n=n,
        k=k,
        index=index,
        seed_master=master,
        seed_stream=seed.stream,
        spectrum=s.values,
        h_num=result.numerator,
        h_den=result.denominator,
        h=result.h,
    )
    problems = validate(g) + check_record(record)
    if problems:
        raise DataIntegrityError(record.key, problems)
    return record


def planned_keys(config: ExperimentConfig, n: int) -> list[tuple[int, int, int]]:
    """Split count_for(n) evenly across the degrees; earlier degrees take the remainder."""

    degrees = config.degrees_for(n)
    base, extra = divmod(config.count_for(n), len(degrees))
    keys: list[tuple[int, int, int]] = []
    for pos, k in enumerate(degrees):
        keys.extend((n, k, index) for index in range(base + (1 if pos < extra else 0)))
    return keys


def dataset_path(dataset_dir: Path, n: int) -> Path:
    return Path(dataset_dir) / f"records_n{n}.jsonl"


def _read_file(path: Path) -> list[GraphRecord]:
    try:
        rows = load_jsonl(path)
    except ValueError as exc:
        raise InvalidParametersError(str(exc)) from exc
    return [GraphRecord.from_dict(row) for row in rows]


def _is_stale(record: GraphRecord, master: int) -> bool:
    return record.seed_master != master or record.seed_stream != record_stream(*record.key)


def build_dataset(config: ExperimentConfig, dataset_dir: Path) -> list[Path]:
    """Create or top up records_n<N>.jsonl for every configured size.

    Records already on disk under the same master seed are kept and not
    regenerated; records from another seed are dropped and rebuilt. Files are
    rewritten sorted by (n, k, index), so reruns and thread counts give
    identical bytes.
    """

    config.validate()
    dataset_dir = Path(dataset_dir)
    written: list[Path] = []
    for n in config.sizes:
        path = dataset_path(dataset_dir, n)
        on_disk = _read_file(path)
        existing = {r.key: r for r in on_disk if not _is_stale(r, config.master_seed)}
        if len(existing) < len(on_disk):
            logger.warning(
                f"n={n}: dropping {len(on_disk) - len(existing)} records not generated from seed {config.master_seed}"
            )
        missing = [key for key in planned_keys(config, n) if key not in existing]
        logger.info(f"n={n}: {len(existing)} records on disk, generating {len(missing)}")

        if missing:
            fresh = Parallel(n_jobs=config.threads)(
                delayed(make_record)(nn, k, index, config.master_seed) for nn, k, index in missing
            )
            for record in fresh:
                existing[record.key] = record

        ordered = [existing[key] for key in sorted(existing)]
        save_jsonl((dict(r.to_dict()) for r in ordered), path)
        written.append(path)
    return written


def _expand(paths: Iterable[Path]) -> list[Path]:
    files: list[Path] = []
    for p in paths:
        p = Path(p)
        if p.is_dir():
            files.extend(sorted(p.glob(RECORD_GLOB)))
        elif p.exists():
            files.append(p)
        else:
            raise InvalidParametersError(f"dataset path {p} does not exist")
    return files


def load_records(paths: Iterable[Path], check: bool = False) -> list[GraphRecord]:
    """Records from files or dataset directories, sorted by key."""

    records: dict[tuple[int, int, int], GraphRecord] = {}
    for path in _expand(paths):
        for record in _read_file(path):
            if check:
                problems = check_record(record)
                if problems:
                    raise DataIntegrityError(record.key, problems)
            records[record.key] = record
    return [records[key] for key in sorted(records)]


def group_by_size(records: Sequence[GraphRecord]) -> dict[int, list[GraphRecord]]:
    grouped: dict[int, list[GraphRecord]] = {}
    for record in records:
        grouped.setdefault(record.n, []).append(record)
    return dict(sorted(grouped.items()))


def records_frame(records: Sequence[GraphRecord]) -> pd.DataFrame:
    rows = []
    for r in records:
        row: dict[str, Any] = {"n": r.n, "k": r.k, "index": r.index}
        for i in range(CSV_EIGS):
            row[f"lambda{i}"] = r.spectrum[i] if i < r.n else float("nan")
        row.update({"h": r.h, "h_num": r.h_num, "h_den": r.h_den})
        rows.append(row)
    columns = ["n", "k", "index", *(f"lambda{i}" for i in range(CSV_EIGS)), "h", "h_num", "h_den"]
    return pd.DataFrame(rows, columns=columns)


def export_csv(records: Sequence[GraphRecord], path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    records_frame(records).to_csv(path, index=False, float_format="%.17g")
    return path
