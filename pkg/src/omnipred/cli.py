"""Command-line driver: data generation, base fitting, training, evaluation, sweeps.

Exit codes: 0 success, 2 usage error, 3 data validation error, 4 numeric failure.
"""

from __future__ import annotations

import functools
import json
import math
import sys
from pathlib import Path

import click

from .calma import AuxiliaryClass, BucketedPredictor, calma_boost, calma_game, default_game_eta
from .dataio import gen_simulated, load_dataset, load_forecasts, save_dataset
from .ensemble import MergedPredictor, ensemble_scheme
from .errors import NumericError, ValidationError
from .evaluation import best_base_model, omni_error
from .game import GamePredictor, default_eta, run_two_player
from .grids import ThetaGrid
from .predictors import BasePredictorSet, enumerate_linear_candidates, fit_base_set
from .sweep import SweepConfig, run_sweep, write_sweep_csv

METHOD_CHOICES = ("two-player", "direct", "calma-boost", "calma-game", "best-base")


def _exit_codes(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValidationError as exc:
            click.echo(f"data validation error: {exc}", err=True)
            sys.exit(3)
        except NumericError as exc:
            click.echo(f"numeric failure: {exc}", err=True)
            sys.exit(4)

    return wrapper


@click.group()
def main():
    """Omniprediction over weighted 0-1 losses: fit, ensemble, evaluate."""


@main.command("gen")
@click.option("--n", type=int, required=True, help="Number of samples.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_exit_codes
def cmd_gen(n, seed, out):
    """Draw a simulated dataset and write it as CSV."""
    data = gen_simulated(n, seed)
    save_dataset(data, out)
    click.echo(f"wrote {data.n} samples to {out}")


def _next_pow2(m: int) -> int:
    return 1 << max(m - 1, 0).bit_length() if m > 1 else 1


@main.command("fit-base")
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--m", type=int, default=16, show_default=True, help="Grid resolution.")
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_exit_codes
def cmd_fit_base(data_path, m, out):
    """Fit the per-threshold base predictors on a (held-out) sample."""
    data = load_dataset(data_path)
    padded = _next_pow2(m)
    if padded != m:
        click.echo(f"note: padding grid from m={m} to m={padded} (power of two)")
        m = padded
    base = fit_base_set(enumerate_linear_candidates(data), data, ThetaGrid(m))
    Path(out).write_text(json.dumps(base.to_config()), encoding="utf-8")
    click.echo(f"fitted base set (m={m}) on {data.n} samples -> {out}")


def _load_base(path) -> BasePredictorSet:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from None
    return BasePredictorSet.from_config(raw)


def _report_line(tag, report) -> str:
    return (
        f"{tag}: sup_gap={report.sup_gap:.6f} "
        f"argmax_theta={report.argmax_theta} n={report.n_test}"
    )


@main.command("run")
@click.option("--method", type=click.Choice(METHOD_CHOICES), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--base", "base_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@click.option("--eta-c", type=float, default=32.0, show_default=True)
@click.option("--eps-c", type=float, default=0.0, show_default=True)
@click.option("--alpha-c", type=float, default=0.5, show_default=True)
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--split", is_flag=True, default=False)
@click.option("--forecasts", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Prediction-matrix CSV providing the pool for best-base.")
@_exit_codes
def cmd_run(method, data_path, base_path, out, eta_c, eps_c, alpha_c, stride, split, forecasts):
    """Train one method and serialize the resulting predictor."""
    data = load_dataset(data_path)
    base = _load_base(base_path)
    m, n = base.m, data.n
    rate = lambda c: c * math.sqrt(math.log(max(m, 2)) / n)  # noqa: E731

    if method == "two-player":
        predictor = run_two_player(data, base, default_eta(m, n, eta_c))
        config = predictor.to_config(base_ref=str(base_path))
    elif method == "direct":
        predictor = ensemble_scheme(base, data, epsilon=rate(eps_c), split=split)
        config = predictor.to_config(base_ref=str(base_path))
    elif method == "calma-boost":
        aux = AuxiliaryClass.from_base_set(base)
        predictor = calma_boost(base, aux, data, alpha=rate(alpha_c))
        config = predictor.to_config()
        config["base_ref"] = str(base_path)
        if predictor.warning:
            click.echo("warning: correction budget exhausted; returning best iterate")
    elif method == "calma-game":
        aux = AuxiliaryClass.from_base_set(base)
        predictor = calma_game(data, aux, m, default_game_eta(len(aux), m, n))
        config = predictor.to_config()
        config["base_ref"] = str(base_path)
    else:  # best-base
        if forecasts is not None:
            pool = list(load_forecasts(forecasts).values())
        else:
            pool = list(base.members)
        predictor = best_base_model(pool, base, data)
        config = {
            "kind": "best-base",
            "base_ref": str(base_path),
            "predictor": predictor.to_config(),
        }

    Path(out).write_text(json.dumps(config), encoding="utf-8")
    report = omni_error(predictor, base, data)
    click.echo(_report_line(f"{method} (train)", report))
    if stride != 1 and method == "two-player":
        click.echo(f"note: evaluation stride {stride} applies at query time")


@main.command("eval")
@click.option("--predictor", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--base", "base_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--data", "data_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--stride", type=int, default=1, show_default=True)
@_exit_codes
def cmd_eval(pred_path, base_path, data_path, stride):
    """Evaluate a serialized predictor on a dataset."""
    base = _load_base(base_path)
    data = load_dataset(data_path)
    try:
        raw = json.loads(Path(pred_path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{pred_path}: invalid JSON ({exc})") from None
    kind = raw.get("kind")
    if kind == "two-player":
        predictor = GamePredictor.from_config(raw, base if "base" not in raw else None)
    elif kind == "direct":
        predictor = MergedPredictor.from_config(raw, base)
    elif kind == "calma-boost":
        aux = AuxiliaryClass.from_base_set(base)
        predictor = BucketedPredictor(
            aux,
            int(raw["m"]),
            float(raw["init_value"]),
            tuple(
                ("ma", int(op[1]), float(op[2])) if op[0] == "ma" else ("cal", tuple(op[1]))
                for op in raw["ops"]
            ),
            warning=bool(raw.get("warning", False)),
        )
    elif kind == "calma-game":
        from .calma import CalmaGamePredictor

        predictor = CalmaGamePredictor.from_config(raw, AuxiliaryClass.from_base_set(base))
    elif kind == "best-base":
        from .predictors import predictor_from_config

        predictor = predictor_from_config(raw["predictor"])
    else:
        raise ValidationError(f"cannot evaluate predictor kind {kind!r}")
    report = omni_error(predictor, base, data)
    click.echo(_report_line(f"{kind} (eval)", report))


@main.command("sweep")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--out", type=click.Path(dir_okay=False), required=True)
@_exit_codes
def cmd_sweep(config_path, out):
    """Run a full sweep from a JSON config and write plot-ready CSV."""
    config = SweepConfig.from_json(config_path)
    rows = run_sweep(config)
    write_sweep_csv(rows, out)
    failures = sum(1 for r in rows if r["status"] != "ok")
    click.echo(f"wrote {len(rows)} rows to {out} ({failures} failed cells)")


if __name__ == "__main__":
    main()
