"""Experiment sweeps: per-cell training/evaluation with derived seeds.

Each cell is one (method, n, c, replicate) combination.  A cell draws its own
base-fit, training, and test samples from a stream keyed by the cell
coordinates, so sweeps are reproducible regardless of execution order, and
cells can run on a bounded worker pool (``OMNI_WORKERS``).
"""

from __future__ import annotations

import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calma import AuxiliaryClass, calma_boost, calma_game, default_game_eta
from .dataio import FiniteDistributionSpec, simulated_spec
from .ensemble import ensemble_scheme
from .errors import ValidationError
from .evaluation import best_base_model, omni_error
from .game import run_two_player
from .grids import ThetaGrid, default_grid_size
from .predictors import enumerate_linear_candidates, fit_base_set

METHODS = ("two-player", "direct", "calma-boost", "calma-game", "best-base")
_METHOD_IDS = {name: k for k, name in enumerate(METHODS)}

SWEEP_COLUMNS = (
    "method",
    "n",
    "m",
    "c",
    "replicate",
    "sup_gap",
    "argmax_theta",
    "status",
    "mean_sup_gap",
    "stderr_sup_gap",
)


@dataclass(frozen=True)
class SweepConfig:
    """Grid of sweep cells plus the shared sampling protocol."""

    n_list: tuple
    methods: tuple
    c_lists: dict
    replicates: int = 40
    m_mode: str = "fixed"  # "fixed" or "sqrt" (m = 2 ** floor(log2(sqrt(n))))
    m: int = 16
    fit_size: int = 500
    test_size: int = 2000
    split: bool = False
    seed: int = 0

    def __post_init__(self):
        if not self.methods:
            raise ValidationError("sweep needs at least one method")
        for method in self.methods:
            if method not in METHODS:
                raise ValidationError(f"unknown method {method!r}; choose from {METHODS}")
        for count, name in (
            (self.replicates, "replicates"),
            (self.fit_size, "fit_size"),
            (self.test_size, "test_size"),
            (self.m, "m"),
        ):
            if count < 1:
                raise ValidationError(f"{name} must be positive, got {count}")
        if any(n < 1 for n in self.n_list):
            raise ValidationError("all sample sizes must be positive")
        if self.m_mode not in ("fixed", "sqrt"):
            raise ValidationError(f"m_mode must be 'fixed' or 'sqrt', got {self.m_mode!r}")
        object.__setattr__(self, "n_list", tuple(int(n) for n in self.n_list))
        object.__setattr__(self, "methods", tuple(self.methods))
        c_lists = {}
        for method in self.methods:
            cs = self.c_lists.get(method, [_default_c(method)])
            if any(c < 0 for c in cs):
                raise ValidationError(f"scaling constants must be nonnegative: {method}")
            c_lists[method] = tuple(float(c) for c in cs)
        object.__setattr__(self, "c_lists", c_lists)

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepConfig":
        raw = dict(raw)
        if "c_list" in raw:  # accepted alias: one c list per method
            raw.setdefault("c_lists", raw.pop("c_list"))
        known = {f.name for f in cls.__dataclass_fields__.values()}  # type: ignore[attr-defined]
        unknown = set(raw) - known
        if unknown:
            raise ValidationError(f"unknown sweep config keys: {sorted(unknown)}")
        return cls(**raw)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(raw)

    def grid_size(self, n: int) -> int:
        return self.m if self.m_mode == "fixed" else default_grid_size(n)

    def cells(self):
        for method in self.methods:
            for n in self.n_list:
                for c in self.c_lists[method]:
                    for replicate in range(self.replicates):
                        yield method, n, c, replicate


def _default_c(method: str) -> float:
    return {"two-player": 32.0, "direct": 0.0, "calma-boost": 0.5}.get(method, 1.0)


def _rate(c: float, m: int, n: int) -> float:
    return c * math.sqrt(math.log(max(m, 2)) / n)


def run_cell(
    method: str,
    n: int,
    c: float,
    replicate: int,
    config: SweepConfig,
    dist: FiniteDistributionSpec,
) -> dict:
    """Train one method on fresh draws and evaluate its omniprediction error."""
    m = config.grid_size(n)
    entropy = [config.seed, _METHOD_IDS[method], n, int(round(c * 1_000_000)), replicate]
    fit_rng, train_rng, test_rng = (
        np.random.Generator(np.random.Philox(s))
        for s in np.random.SeedSequence(entropy).spawn(3)
    )
    row = {"method": method, "n": n, "m": m, "c": c, "replicate": replicate}
    try:
        fit_data = dist.sample(config.fit_size, fit_rng)
        train = dist.sample(n, train_rng)
        test = dist.sample(config.test_size, test_rng)
        grid = ThetaGrid(m)
        base = fit_base_set(enumerate_linear_candidates(fit_data), fit_data, grid)

        if method == "two-player":
            predictor = run_two_player(train, base, _rate(c, m, n))
        elif method == "direct":
            predictor = ensemble_scheme(base, train, epsilon=_rate(c, m, n), split=config.split)
        elif method == "calma-boost":
            aux = AuxiliaryClass.from_base_set(base)
            predictor = calma_boost(base, aux, train, alpha=_rate(c, m, n))
        elif method == "calma-game":
            aux = AuxiliaryClass.from_base_set(base)
            predictor = calma_game(train, aux, m, default_game_eta(len(aux), m, n))
        elif method == "best-base":
            predictor = best_base_model(list(base.members), base, train)
        else:  # pragma: no cover - guarded by config validation
            raise ValidationError(f"unknown method {method!r}")

        report = omni_error(predictor, base, test)
        row.update(
            sup_gap=report.sup_gap, argmax_theta=report.argmax_theta, status="ok"
        )
    except Exception as exc:  # noqa: BLE001 - recorded per row, sweep continues
        row.update(sup_gap=None, argmax_theta=None, status=f"error: {exc}")
    return row


def run_sweep(config: SweepConfig, dist: FiniteDistributionSpec | None = None) -> list[dict]:
    """Run every cell and attach per-cell mean / standard error columns."""
    dist = dist or simulated_spec()
    cells = list(config.cells())
    workers = max(int(os.environ.get("OMNI_WORKERS", "1")), 1)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(
                pool.map(lambda cell: run_cell(*cell, config=config, dist=dist), cells)
            )
    else:
        rows = [run_cell(*cell, config=config, dist=dist) for cell in cells]

    by_cell: dict[tuple, list] = {}
    for row in rows:
        if row["status"] == "ok":
            by_cell.setdefault((row["method"], row["n"], row["c"]), []).append(row["sup_gap"])
    for row in rows:
        gaps = by_cell.get((row["method"], row["n"], row["c"]), [])
        row["mean_sup_gap"] = float(np.mean(gaps)) if gaps else None
        row["stderr_sup_gap"] = (
            float(np.std(gaps, ddof=1) / math.sqrt(len(gaps))) if len(gaps) > 1 else None
        )
    return rows


def cell_summary(rows: list[dict]) -> dict[tuple, dict]:
    """Aggregate rows into per-(method, n, c) means and standard errors."""
    out: dict[tuple, dict] = {}
    for row in rows:
        if row["status"] != "ok":
            continue
        key = (row["method"], row["n"], row["c"])
        entry = out.setdefault(key, {"gaps": []})
        entry["gaps"].append(row["sup_gap"])
    for key, entry in out.items():
        gaps = np.asarray(entry.pop("gaps"))
        entry["mean"] = float(gaps.mean())
        entry["stderr"] = float(gaps.std(ddof=1) / math.sqrt(gaps.size)) if gaps.size > 1 else 0.0
        entry["count"] = int(gaps.size)
    return out


def write_sweep_csv(rows: list[dict], path) -> None:
    import csv

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(SWEEP_COLUMNS)
        for row in rows:
            writer.writerow(
                ["" if row.get(col) is None else row.get(col) for col in SWEEP_COLUMNS]
            )
