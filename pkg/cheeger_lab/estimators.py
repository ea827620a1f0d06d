from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from cheeger_lab.errors import InvalidParametersError, RankDeficientError

logger = logging.getLogger(__name__)

SPECTRUM_SLACK = 1e-9
RANK_TOL = 1e-12
MAX_EIGS = 4
LINEAR_MODEL_HEADER = "# cheeger-lab linear model v1"


@dataclass(frozen=True)
class BoundSet:
    lower: float
    upper_gap: float
    upper_mohar_size: float
    upper_mohar_spec: float
    upper: float


def bounds(k: int, n: int, lambda1: float) -> BoundSet:
    """Spectral-gap lower/upper bounds and the two Mohar upper bounds on h(G).

    The spectral Mohar bound is left out of `upper` for n = 3, where the graph
    can only be K3.
    """

    if not 2 <= k < n:
        raise InvalidParametersError(f"bounds need 2 <= k < n, got k={k}, n={n}")
    if abs(lambda1) > k + SPECTRUM_SLACK:
        raise InvalidParametersError(f"invalid spectrum: |lambda1|={abs(lambda1)} exceeds k={k}")

    gap = max(k - lambda1, 0.0)
    lower = gap / 2.0
    upper_gap = math.sqrt(2.0 * k * gap)
    if n % 2 == 0:
        upper_mohar_size = (k / 2.0) * (n / (n - 1))
    else:
        upper_mohar_size = (k / 2.0) * ((n + 1) / (n - 1))
    upper_mohar_spec = math.sqrt(max(k * k - lambda1 * lambda1, 0.0))

    candidates = [upper_gap, upper_mohar_size]
    if n > 3:
        candidates.append(upper_mohar_spec)
    return BoundSet(
        lower=lower,
        upper_gap=upper_gap,
        upper_mohar_size=upper_mohar_size,
        upper_mohar_spec=upper_mohar_spec,
        upper=min(candidates),
    )


def deviation(h_est: float, h_true: float) -> float:
    """Relative deviation |(h_est - h) / h|."""
    if not h_true > 0:
        raise InvalidParametersError(f"deviation needs a positive true value, got {h_true}")
    return abs((h_est - h_true) / h_true)


def mean_std(values: Iterable[float]) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation, in input order."""
    arr = np.fromiter(values, dtype=np.float64)
    if arr.size == 0:
        return float("nan"), float("nan")
    mean = float(arr.sum() / arr.size)
    return mean, float(math.sqrt(((arr - mean) ** 2).sum() / arr.size))


@dataclass(frozen=True)
class LinearModel:
    coeffs: tuple[float, ...]
    intercept: float

    @property
    def m(self) -> int:
        return len(self.coeffs)


def fit_linear(records: Sequence[tuple[Sequence[float], float]]) -> LinearModel:
    """Least-squares fit of h on the top-m eigenvalues plus an intercept.

    Columns are scaled to unit norm before forming the normal equations; the
    scaled Gram matrix is rejected when its eigenvalue ratio falls below
    RANK_TOL.
    """

    if not records:
        raise InvalidParametersError("fit_linear needs at least one record")
    m = len(records[0][0])
    if not 1 <= m <= MAX_EIGS:
        raise InvalidParametersError(f"eigenvalue count m={m} outside 1..{MAX_EIGS}")
    if len(records) < m + 1:
        raise InvalidParametersError(f"fit_linear with m={m} needs at least {m + 1} records, got {len(records)}")

    x = np.ones((len(records), m + 1), dtype=np.float64)
    y = np.empty(len(records), dtype=np.float64)
    for row, (prefix, h) in enumerate(records):
        if len(prefix) != m:
            raise InvalidParametersError(f"record {row} has {len(prefix)} eigenvalues, expected {m}")
        x[row, :m] = prefix
        y[row] = h

    norms = np.linalg.norm(x, axis=0)
    if np.any(norms == 0.0):
        raise RankDeficientError("design matrix has an all-zero column")
    xs = x / norms
    gram = xs.T @ xs
    eig = np.linalg.eigvalsh(gram)
    if eig[0] <= RANK_TOL * eig[-1]:
        raise RankDeficientError(f"Gram matrix is singular (eigenvalue ratio {eig[0] / eig[-1]:.3e})")

    beta = linalg.solve(gram, xs.T @ y, assume_a="sym") / norms
    return LinearModel(coeffs=tuple(float(b) for b in beta[:m]), intercept=float(beta[m]))


def predict_linear(model: LinearModel, prefix: Sequence[float]) -> float:
    if len(prefix) != model.m:
        raise InvalidParametersError(f"arity mismatch: model uses {model.m} eigenvalues, got {len(prefix)}")
    return float(sum(c * x for c, x in zip(model.coeffs, prefix)) + model.intercept)


def save_linear(model: LinearModel, path: Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [
        LINEAR_MODEL_HEADER,
        f"m = {model.m}",
        "coeffs = " + " ".join(f"{c:.17g}" for c in model.coeffs),
        f"intercept = {model.intercept:.17g}",
    ]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_linear(path: Path) -> LinearModel:
    values: dict[str, str] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise InvalidParametersError(f"{path}: malformed line {line!r}")
        values[key.strip()] = value.strip()
    try:
        coeffs = tuple(float(c) for c in values["coeffs"].split())
        model = LinearModel(coeffs=coeffs, intercept=float(values["intercept"]))
        declared_m = int(values["m"])
    except (KeyError, ValueError) as exc:
        raise InvalidParametersError(f"{path}: not a linear model file ({exc})") from exc
    if declared_m != model.m:
        raise InvalidParametersError(f"{path}: m={declared_m} but {model.m} coefficients")
    return model


def is_linear_model_file(path: Path) -> bool:
    with Path(path).open(encoding="utf-8") as f:
        return f.readline().strip() == LINEAR_MODEL_HEADER


def deviation_by_gap(
    gaps: Sequence[float],
    deviations: Sequence[float],
    bins: int = 4,
) -> list[tuple[float, float, float, int]]:
    """Mean deviation per spectral-gap quantile bin.

    Returns (gap_lo, gap_hi, mean deviation, count) per bin, lowest gaps first.
    Bins whose quantile edges coincide collapse into their neighbour.
    """

    if bins < 1:
        raise InvalidParametersError(f"bins must be >= 1, got {bins}")
    if len(gaps) != len(deviations):
        raise InvalidParametersError(f"{len(gaps)} gaps but {len(deviations)} deviations")
    if not gaps:
        return []
    g = np.asarray(gaps, dtype=np.float64)
    d = np.asarray(deviations, dtype=np.float64)
    edges = np.unique(np.quantile(g, np.linspace(0.0, 1.0, bins + 1)))
    if edges.size == 1:
        return [(float(edges[0]), float(edges[0]), float(d.mean()), int(d.size))]

    # Right-closed on the last bin so the maximum gap is counted.
    which = np.clip(np.searchsorted(edges, g, side="right") - 1, 0, edges.size - 2)
    rows: list[tuple[float, float, float, int]] = []
    for b in range(edges.size - 1):
        selected = d[which == b]
        if selected.size == 0:
            continue
        rows.append((float(edges[b]), float(edges[b + 1]), mean_std(selected)[0], int(selected.size)))
    return rows
