"""Two-player-game omnipredictor.

One player maintains a mixture ``q`` over the grid thetas with multiplicative
weight (Hedge) updates; the other best-responds at each sample with a
randomized prediction over the grid.  The best response has a closed form
supported on at most two adjacent grid points, so each round costs O(m).
Averaging the per-round responses yields the final randomized predictor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .grids import ThetaGrid
from .predictors import BasePredictorSet, Dataset, GridDistribution

_RHO_DRIFT_TOL = 1e-12
# Hedge weights are strictly positive in exact arithmetic; exp() underflow
# would misreport them as 0 and perturb the best-response tie handling.
_WEIGHT_FLOOR = 1e-300


def _positive_softmax(log_q: np.ndarray) -> np.ndarray:
    w = np.exp(log_q - log_q.max())
    # exact -inf encodes a genuine zero weight; finite logs stay positive
    w = np.where(np.isfinite(log_q), np.maximum(w, _WEIGHT_FLOOR), w)
    return w / w.sum()


def check_mixture_weights(q: np.ndarray, m: int | None = None) -> np.ndarray:
    """Validate a probability vector over the grid thetas."""
    q = np.asarray(q, dtype=float)
    if q.ndim != 1 or (m is not None and q.size != m):
        raise ValidationError(f"mixture weights must be a length-{m} vector, got shape {q.shape}")
    if (q < 0).any():
        raise ValidationError("mixture weights must be nonnegative")
    if abs(q.sum() - 1.0) > 1e-12:
        raise ValidationError(f"mixture weights must sum to 1, got {q.sum()!r}")
    return q


def _solve_minmax_indices(q: np.ndarray, lows: np.ndarray) -> tuple[int, float]:
    """Best-response support point and mixing weight for one covariate.

    ``lows[i-1]`` says whether base member i output its low support value.
    Returns ``(j_star, rho)``: the response puts mass ``1 - rho`` on grid
    point ``j_star / m`` and ``rho`` on ``(j_star + 1) / m``.

    ``j_star`` is the largest grid index whose theta-tail weight still covers
    the weight of the low-side members.  The comparison is evaluated as
    ``above_high[j] >= below_low[j]`` over two disjoint partial sums, which
    is free of cancellation: a tie then happens only when both sets are
    genuinely weightless, exactly as in the defining supremum.
    """
    m = q.size
    q_high = np.where(lows, 0.0, q)
    q_low = np.where(lows, q, 0.0)
    above_high = np.empty(m + 1)  # weight of high-side members with index > j
    above_high[:m] = np.cumsum(q_high[::-1])[::-1]
    above_high[m] = 0.0
    below_low = np.empty(m + 1)  # weight of low-side members with index <= j
    below_low[0] = 0.0
    below_low[1:] = np.cumsum(q_low)
    j_star = int((above_high >= below_low).sum()) - 1
    if j_star >= m:
        return m, 0.0
    numerator = float(above_high[j_star] - below_low[j_star])
    denom = float(q[j_star])
    if denom <= _RHO_DRIFT_TOL:
        # Exact arithmetic forces the numerator to zero here; tolerate drift.
        if numerator > _RHO_DRIFT_TOL:
            raise NumericError(
                f"degenerate best-response denominator with numerator {numerator}"
            )
        return j_star, 0.0
    rho = numerator / denom
    return j_star, float(min(max(rho, 0.0), 1.0))


def solve_minmax(q: np.ndarray, lows: np.ndarray, grid: ThetaGrid) -> GridDistribution:
    """Closed-form solution of the per-sample min-max response problem.

    The returned distribution is supported on at most two adjacent grid
    points and its mixture objective is nonpositive for both label values.
    """
    q = check_mixture_weights(q, grid.m)
    lows = np.asarray(lows, dtype=bool)
    if lows.shape != (grid.m,):
        raise ValidationError(f"base outputs must be a length-{grid.m} low/high vector")
    j_star, rho = _solve_minmax_indices(q, lows)
    probs = np.zeros(grid.m + 1)
    probs[j_star] += 1.0 - rho
    if rho > 0.0:
        probs[j_star + 1] += rho
    return GridDistribution(probs)


def mixture_objective(
    q: np.ndarray, lows: np.ndarray, probs: np.ndarray, p_y: float, m: int
) -> float:
    """Value of the competitor-relative mixture loss at a response distribution.

    Computes ``E_{p ~ P, Y ~ Ber(p_y)} sum_i q_i (loss_i(p, Y) - loss_i(f_i, Y))``,
    which simplifies to ``sum_j P_j sum_i q_i (p_y - theta_i) (1{j < i} - lows_i)``.
    """
    q = np.asarray(q, dtype=float)
    lows = np.asarray(lows, dtype=bool)
    probs = np.asarray(probs, dtype=float)
    i = np.arange(1, m + 1)
    thetas = (2.0 * i - 1.0) / (2.0 * m)
    j = np.arange(m + 1)[:, None]
    delta = (j < i).astype(float) - lows.astype(float)
    inner = delta @ (q * (p_y - thetas))
    return float(probs @ inner)


def hedge_update(q: np.ndarray, payoffs: np.ndarray, eta: float) -> np.ndarray:
    """Multiplicative weights step ``q_i <- q_i * exp(eta * payoff_i)``, renormalised.

    Weight grows on objectives where the current predictor loses to its
    competitor.  Arithmetic is done in the log domain so long runs cannot
    overflow.
    """
    q = check_mixture_weights(q)
    payoffs = np.asarray(payoffs, dtype=float)
    if payoffs.shape != q.shape:
        raise ValidationError("payoff vector must match the weight vector")
    if eta < 0:
        raise ValidationError(f"learning rate must be nonnegative, got {eta}")
    with np.errstate(divide="ignore"):
        log_q = np.where(q > 0, np.log(np.where(q > 0, q, 1.0)), -np.inf)
    return _positive_softmax(log_q + eta * payoffs)


@dataclass(frozen=True)
class GamePredictor:
    """Averaged randomized predictor produced by the online game."""

    grid: ThetaGrid
    base: BasePredictorSet
    weight_history: np.ndarray  # (n, m); row t is the mixture used at round t
    eta: float

    def __post_init__(self):
        wh = np.asarray(self.weight_history, dtype=float)
        if wh.ndim != 2 or wh.shape[0] < 1 or wh.shape[1] != self.grid.m:
            raise ValidationError("weight history must be a nonempty (n, m) array")
        if (wh < 0).any() or np.abs(wh.sum(axis=1) - 1.0).max() > 1e-12:
            raise ValidationError("every weight history row must be a probability vector")
        wh.setflags(write=False)
        object.__setattr__(self, "weight_history", wh)

    @property
    def n_rounds(self) -> int:
        return self.weight_history.shape[0]

    def support_values(self) -> np.ndarray:
        return self.grid.pred_grid

    def predict_dist(self, x: np.ndarray, stride: int = 1) -> GridDistribution:
        """Uniform average of the per-round best responses at ``x``.

        ``stride`` subsamples the round history (every stride-th mixture) to
        trade accuracy for query time; the default uses every round.
        """
        probs = self.predict_dist_matrix(np.atleast_2d(np.asarray(x, dtype=float)), stride)
        return GridDistribution(probs[0])

    def predict_dist_matrix(self, X: np.ndarray, stride: int = 1) -> np.ndarray:
        """Row-wise averaged response distributions, shape (n_queries, m + 1)."""
        if stride < 1:
            raise ValidationError(f"stride must be >= 1, got {stride}")
        lows_all = self.base.low_matrix(X)
        wh = self.weight_history[::stride]
        out = np.empty((X.shape[0], self.grid.m + 1))
        # Responses depend on x only through the low/high pattern, so solve
        # each distinct pattern once against the full mixture history.
        patterns, inverse = np.unique(lows_all, axis=0, return_inverse=True)
        for k, lows in enumerate(patterns):
            out[inverse == k] = _averaged_response(wh, lows.astype(bool))
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Mean of the averaged response distribution at each row of ``X``."""
        m = self.grid.m
        return self.predict_dist_matrix(X) @ (np.arange(m + 1) / m)

    def to_config(self, base_ref: str | None = None) -> dict:
        config = {
            "kind": "two-player",
            "m": self.grid.m,
            "eta": self.eta,
            "weight_history": self.weight_history.tolist(),
        }
        if base_ref is None:
            config["base"] = self.base.to_config()
        else:
            config["base_ref"] = base_ref
        return config

    @classmethod
    def from_config(cls, config: dict, base: BasePredictorSet | None = None) -> "GamePredictor":
        if base is None:
            if "base" not in config:
                raise ValidationError("config stores a base reference; pass the base set")
            base = BasePredictorSet.from_config(config["base"])
        grid = ThetaGrid(int(config["m"]))
        return cls(grid, base, np.asarray(config["weight_history"], dtype=float), float(config["eta"]))


def _averaged_response(weight_history: np.ndarray, lows: np.ndarray) -> np.ndarray:
    """Average best-response distribution for one low/high pattern, vectorised over rounds."""
    n, m = weight_history.shape
    q_high = np.where(lows[None, :], 0.0, weight_history)
    q_low = np.where(lows[None, :], weight_history, 0.0)
    above_high = np.zeros((n, m + 1))
    above_high[:, :m] = np.cumsum(q_high[:, ::-1], axis=1)[:, ::-1]
    below_low = np.zeros((n, m + 1))
    below_low[:, 1:] = np.cumsum(q_low, axis=1)
    j_star = (above_high >= below_low).sum(axis=1) - 1
    rho = np.zeros(n)
    interior = j_star < m
    if interior.any():
        ji = j_star[interior]
        rows = np.nonzero(interior)[0]
        numer = above_high[rows, ji] - below_low[rows, ji]
        denom = weight_history[rows, ji]
        safe = denom > _RHO_DRIFT_TOL
        if ((~safe) & (numer > _RHO_DRIFT_TOL)).any():
            raise NumericError("degenerate best-response denominator with nonzero numerator")
        rho_i = np.zeros(ji.size)
        rho_i[safe] = np.clip(numer[safe] / denom[safe], 0.0, 1.0)
        rho[rows] = rho_i
    probs = np.zeros(m + 1)
    np.add.at(probs, j_star, (1.0 - rho) / n)
    np.add.at(probs, np.minimum(j_star + 1, m), rho / n)
    return probs


def default_eta(m: int, n: int, c: float = 32.0) -> float:
    """Learning rate ``c * sqrt(log(m) / n)``; ``c = 32`` works well empirically."""
    if m < 2:
        return 0.0
    return c * math.sqrt(math.log(m) / n)


def run_two_player(data: Dataset, base: BasePredictorSet, eta: float) -> GamePredictor:
    """Online two-player loop over the sample, in order.

    At round t the current mixture's best response is computed at ``x_t``;
    the mixture is then updated with payoff ``E_P[loss_i(p, y_t)] -
    loss_i(f_i(x_t), y_t)`` per theta.  The realised Hedge regret is checked
    against ``eta * n + log(m) / eta`` before returning.
    """
    if data.n == 0:
        raise ValidationError("cannot run the game on an empty dataset")
    if eta <= 0:
        raise ValidationError(f"learning rate must be positive, got {eta}")
    m = base.m
    grid = base.grid
    lows_all = base.low_matrix(data.X)
    thetas = grid.thetas
    idx = np.arange(1, m + 1)

    log_q = np.full(m, -math.log(m))
    history = np.empty((data.n, m))
    cumulative = np.zeros(m)
    mixture_total = 0.0

    for t in range(data.n):
        q = _positive_softmax(log_q)
        log_q -= log_q.max()
        history[t] = q
        lows = lows_all[t]
        j_star, rho = _solve_minmax_indices(q, lows)
        y = int(data.y[t])
        p_ge = (1.0 - rho) * (j_star >= idx) + rho * (j_star + 1 >= idx)
        if y == 0:
            response_loss = thetas * p_ge
            base_loss = np.where(lows, 0.0, thetas)
        else:
            response_loss = (1.0 - thetas) * (1.0 - p_ge)
            base_loss = np.where(lows, 1.0 - thetas, 0.0)
        payoff = response_loss - base_loss
        cumulative += payoff
        mixture_total += float(q @ payoff)
        log_q = log_q + eta * payoff

    regret = float(cumulative.max() - mixture_total)
    bound = eta * data.n + (math.log(m) / eta if m > 1 else 0.0)
    if regret > bound + 1e-9:
        raise NumericError(f"hedge regret {regret} exceeded its bound {bound}")
    return GamePredictor(grid, base, history, eta)


def predict_game(gp: GamePredictor, x: np.ndarray, stride: int = 1) -> GridDistribution:
    """Averaged response distribution of a fitted game predictor at ``x``."""
    return gp.predict_dist(x, stride=stride)
