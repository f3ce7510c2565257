"""Simulated data, quantile-forecast ingestion, and CSV persistence.

CSV schemas (UTF-8, header row required):

* datasets: ``x0,...,x{d-1},y`` with covariate floats and binary labels;
* prediction matrices: ``sample_id,forecaster_id,p`` with ``p`` in [0, 1];
* quantile forecasts: ``item_id,forecaster_id,tau,quantile`` in long format.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ValidationError
from .predictors import Dataset, LookupPredictor


@dataclass(frozen=True)
class FiniteDistributionSpec:
    """Finite covariate distribution with per-point label probabilities."""

    support: np.ndarray
    px: np.ndarray
    py_given_x: np.ndarray

    def __post_init__(self):
        support = np.asarray(self.support, dtype=float)
        if support.ndim == 1:
            support = support[:, None]
        px = np.asarray(self.px, dtype=float)
        py = np.asarray(self.py_given_x, dtype=float)
        if px.shape != (support.shape[0],) or py.shape != (support.shape[0],):
            raise ValidationError("px and py_given_x must have one entry per support point")
        if (px < 0).any() or abs(px.sum() - 1.0) > 1e-12:
            raise ValidationError("px must be a probability vector")
        if ((py < 0) | (py > 1)).any():
            raise ValidationError("py_given_x entries must lie in [0, 1]")
        for arr in (support, px, py):
            arr.setflags(write=False)
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "px", px)
        object.__setattr__(self, "py_given_x", py)

    def covariates(self) -> np.ndarray:
        return self.support

    def sample(self, n: int, rng: np.random.Generator) -> Dataset:
        idx = rng.choice(self.support.shape[0], size=n, p=self.px)
        y = (rng.random(n) < self.py_given_x[idx]).astype(np.int8)
        return Dataset(self.support[idx], y)


def simulated_spec() -> FiniteDistributionSpec:
    """Three-point covariate distribution whose per-theta optima disagree.

    X takes values 0.05, 0.45, 0.85 with probabilities 0.1, 0.6, 0.3 and
    P(Y=1 | X) is 0.3, 0.9, 0.4: low thresholds favour predicting below at
    x = 0.05 while high thresholds favour predicting above, so no monotone
    rule is optimal everywhere and ensembling has real work to do.
    """
    return FiniteDistributionSpec(
        support=np.array([0.05, 0.45, 0.85]),
        px=np.array([0.1, 0.6, 0.3]),
        py_given_x=np.array([0.3, 0.9, 0.4]),
    )


def gen_simulated(n: int, seed: int) -> Dataset:
    """Deterministic i.i.d. draw from the simulated spec.

    Uses a counter-based generator keyed by ``seed``; the same ``(n, seed)``
    always yields a bit-identical dataset.
    """
    if n < 1:
        raise ValidationError(f"sample size must be positive, got {n}")
    rng = np.random.Generator(np.random.Philox(key=np.uint64(int(seed) & (2**64 - 1))))
    return simulated_spec().sample(n, rng)


@dataclass(frozen=True)
class QuantileForecast:
    """Monotone quantile estimates ``q[tau]`` at strictly increasing levels."""

    taus: np.ndarray
    quantiles: np.ndarray
    forecaster_id: str = ""
    item_id: str = ""

    def __post_init__(self):
        taus = np.asarray(self.taus, dtype=float)
        quantiles = np.asarray(self.quantiles, dtype=float)
        if taus.ndim != 1 or taus.size < 1 or taus.shape != quantiles.shape:
            raise ValidationError("taus and quantiles must be matching nonempty vectors")
        if (taus <= 0).any() or (taus >= 1).any() or (np.diff(taus) <= 0).any():
            raise ValidationError("tau levels must be strictly increasing inside (0, 1)")
        if (np.diff(quantiles) < 0).any():
            raise ValidationError("quantile values must be nondecreasing")
        taus.setflags(write=False)
        quantiles.setflags(write=False)
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "quantiles", quantiles)


def interpolate_cdf(qf: QuantileForecast, x: float) -> float:
    """Piecewise-linear CDF estimate built from the quantile curve.

    Clamps to 1 at and above the top quantile and to 0 below the bottom one;
    in between, linearly interpolates the tau levels over the bracketing
    quantile segment.  Zero-width segments (tied quantiles) resolve to the
    highest tau at the tie.
    """
    q = qf.quantiles
    t = qf.taus
    if x >= q[-1]:
        return 1.0
    if x < q[0]:
        return 0.0
    idx = int(np.searchsorted(q, x, side="right"))
    t0, t1 = t[idx - 1], t[idx]
    q0, q1 = q[idx - 1], q[idx]
    return float(t0 + (t1 - t0) / (q1 - q0) * (x - q0))


def _cdf_left_limit(qf: QuantileForecast, x: float) -> float:
    """Limit of the interpolated CDF from below at ``x``."""
    q = qf.quantiles
    t = qf.taus
    if x <= q[0]:
        return 0.0
    if x > q[-1]:
        return 1.0
    idx = int(np.searchsorted(q, x, side="left"))
    t0, t1 = t[idx - 1], t[idx]
    q0, q1 = q[idx - 1], q[idx]
    return float(t0 + (t1 - t0) / (q1 - q0) * (x - q0))


def prob_nonzero_sale(qf: QuantileForecast, mode: str = "cdf_at_zero") -> float:
    """Forecast probability of at least one sale from a quantile curve.

    ``cdf_at_zero`` uses ``1 - F(0)`` (sales are integers, so the event is
    ``Y > 0``); ``left_limit_at_one`` uses ``1 - F(1-)`` instead.
    """
    if mode == "cdf_at_zero":
        raw = 1.0 - interpolate_cdf(qf, 0.0)
    elif mode == "left_limit_at_one":
        raw = 1.0 - _cdf_left_limit(qf, 1.0)
    else:
        raise ValidationError(f"unknown mode {mode!r}")
    return float(min(max(raw, 0.0), 1.0))


def save_dataset(data: Dataset, path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"x{i}" for i in range(data.dim)] + ["y"])
        for row, label in zip(data.X, data.y):
            writer.writerow([repr(float(v)) for v in row] + [int(label)])


def load_dataset(path) -> Dataset:
    path = Path(path)
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValidationError(f"{path}: empty file") from None
        if len(header) < 2 or header[-1] != "y" or not all(
            name == f"x{i}" for i, name in enumerate(header[:-1])
        ):
            raise ValidationError(f"{path}: expected header x0,...,y, got {header}")
        dim = len(header) - 1
        xs, ys = [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dim + 1:
                raise ValidationError(f"{path} line {lineno}: expected {dim + 1} fields")
            try:
                xs.append([float(v) for v in row[:-1]])
            except ValueError:
                raise ValidationError(f"{path} line {lineno}: malformed covariate") from None
            if row[-1] not in ("0", "1"):
                raise ValidationError(f"{path} line {lineno}: field y must be 0 or 1")
            ys.append(int(row[-1]))
    if not xs:
        raise ValidationError(f"{path}: no data rows")
    return Dataset(np.array(xs), np.array(ys))


def load_forecasts(path) -> dict[str, LookupPredictor]:
    """Long-format prediction matrix -> one lookup predictor per forecaster.

    Covariate keys are the numeric sample ids (1-D).
    """
    path = Path(path)
    tables: dict[str, dict] = {}
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["sample_id", "forecaster_id", "p"]:
            raise ValidationError(f"{path}: expected header sample_id,forecaster_id,p")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 3:
                raise ValidationError(f"{path} line {lineno}: expected 3 fields")
            sample_id, forecaster_id, raw_p = row
            try:
                key = (float(sample_id),)
                p = float(raw_p)
            except ValueError:
                raise ValidationError(f"{path} line {lineno}: malformed numeric field") from None
            if not 0.0 <= p <= 1.0:
                raise ValidationError(f"{path} line {lineno}: field p outside [0, 1]")
            tables.setdefault(forecaster_id, {})[key] = p
    if not tables:
        raise ValidationError(f"{path}: no forecast rows")
    return {fid: LookupPredictor(table) for fid, table in sorted(tables.items())}


def load_quantiles(path) -> dict[tuple[str, str], QuantileForecast]:
    """Long-format quantile file -> forecasts keyed by (item, forecaster)."""
    path = Path(path)
    groups: dict[tuple[str, str], list] = {}
    with path.open("r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["item_id", "forecaster_id", "tau", "quantile"]:
            raise ValidationError(f"{path}: expected header item_id,forecaster_id,tau,quantile")
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4:
                raise ValidationError(f"{path} line {lineno}: expected 4 fields")
            item_id, forecaster_id, raw_tau, raw_q = row
            try:
                tau, q = float(raw_tau), float(raw_q)
            except ValueError:
                raise ValidationError(f"{path} line {lineno}: malformed numeric field") from None
            groups.setdefault((item_id, forecaster_id), []).append((tau, q, lineno))
    out = {}
    for key, rows in sorted(groups.items()):
        rows.sort(key=lambda r: r[0])
        taus = np.array([r[0] for r in rows])
        quantiles = np.array([r[1] for r in rows])
        try:
            out[key] = QuantileForecast(taus, quantiles, forecaster_id=key[1], item_id=key[0])
        except ValidationError as exc:
            raise ValidationError(f"{path}: forecast {key}: {exc}") from None
    return out
