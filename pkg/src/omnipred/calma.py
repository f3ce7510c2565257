"""Calibrated-multiaccuracy baselines.

``calma_boost`` is the boosting variant used in the experiments: alternate
between multiplicative-style residual corrections against an auxiliary class
and histogram recalibration on width-1/m buckets.  ``calma_game`` is the
game-based reference construction: Hedge over the auxiliary class (signed)
plus every sign function on the output grid, with an exact per-round best
response over distributions on ``{1/m, ..., 1}``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NumericError, ValidationError
from .predictors import BasePredictorSet, Dataset, DeterministicPredictor

CALMA_GAME_MAX_M = 20


@dataclass(frozen=True)
class AuxiliaryClass:
    """Finite class of bounded reweighting functions over covariates."""

    members: tuple  # callables mapping an (n, d) array to values in [-1, 1]
    labels: tuple

    def __post_init__(self):
        if not self.members:
            raise ValidationError("auxiliary class must be nonempty")
        if len(self.labels) != len(self.members):
            raise ValidationError("need one label per member")

    def __len__(self) -> int:
        return len(self.members)

    def evaluate(self, X: np.ndarray) -> np.ndarray:
        """Member values at each covariate row, shape (n, len(self))."""
        out = np.column_stack([g(X) for g in self.members])
        if (np.abs(out) > 1.0 + 1e-12).any():
            raise ValidationError("auxiliary members must take values in [-1, 1]")
        return np.clip(out, -1.0, 1.0)

    @classmethod
    def from_base_set(cls, base: BasePredictorSet) -> "AuxiliaryClass":
        """Discrete loss derivatives of the recoded base members.

        Member i maps x to ``loss_i(f_i(x), 1) - loss_i(f_i(x), 0)``, which is
        ``1 - theta_i`` when the member outputs low and ``-theta_i`` otherwise.
        """
        members = []
        labels = []
        for member in base.members:
            theta = member.theta

            def g(X, member=member, theta=theta):
                return np.where(member.is_low(X), 1.0 - theta, -theta)

            members.append(g)
            labels.append(f"loss-derivative@{theta:g}")
        return cls(tuple(members), tuple(labels))


def ma_error(p: DeterministicPredictor, aux: AuxiliaryClass, data: Dataset) -> float:
    """Largest absolute reweighted residual ``|E_n[g(X) (Y - p(X))]|`` over the class."""
    preds = np.asarray(p.predict(data.X), dtype=float)
    return _ma_error_values(preds, aux.evaluate(data.X), data.y)


def _ma_error_values(preds: np.ndarray, g_matrix: np.ndarray, y: np.ndarray) -> float:
    residual = y.astype(float) - preds
    return float(np.abs(g_matrix.T @ residual).max() / y.size)


def ece(p: DeterministicPredictor, data: Dataset) -> float:
    """Expected calibration error with grouping by exact predicted value."""
    preds = np.asarray(p.predict(data.X), dtype=float)
    return ece_values(preds, data.y)


def ece_values(preds: np.ndarray, y: np.ndarray) -> float:
    values, inverse = np.unique(preds, return_inverse=True)
    counts = np.bincount(inverse, minlength=values.size)
    label_means = np.bincount(inverse, weights=y, minlength=values.size) / counts
    return float((counts / y.size) @ np.abs(values - label_means))


def ece_randomized(values: np.ndarray, prob_matrix: np.ndarray, y: np.ndarray) -> float:
    """Calibration error of a randomized predictor given per-sample output laws."""
    mass = prob_matrix.sum(axis=0)
    hit = mass > 0
    label_mean = np.zeros(values.size)
    label_mean[hit] = (prob_matrix.T @ y.astype(float))[hit] / mass[hit]
    return float((mass[hit] / y.size) @ np.abs(values[hit] - label_mean[hit]))


@dataclass(frozen=True)
class BucketedPredictor:
    """Boosted score chained with histogram recalibration tables.

    ``ops`` replays the fitting history: ``("ma", g_index, delta)`` adds a
    clipped residual correction, ``("cal", values)`` snaps the score to its
    bucket's stored output (buckets of width ``1/m``; buckets that were empty
    during fitting pass the score through unchanged).
    """

    aux: AuxiliaryClass
    m: int
    init_value: float
    ops: tuple
    warning: bool = False

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        g_matrix = self.aux.evaluate(X)
        p = np.full(X.shape[0], self.init_value)
        for op in self.ops:
            if op[0] == "ma":
                _, g_idx, delta = op
                p = np.clip(p + delta * g_matrix[:, g_idx], 0.0, 1.0)
            else:
                _, values = op
                buckets = _bucket_indices(p, self.m)
                table = np.asarray(values, dtype=float)
                p = np.where(np.isnan(table[buckets]), p, table[buckets])
        return p

    def to_config(self) -> dict:
        return {
            "kind": "calma-boost",
            "m": self.m,
            "init_value": self.init_value,
            "warning": self.warning,
            "ops": [list(op) if op[0] == "ma" else [op[0], list(op[1])] for op in self.ops],
        }


def _bucket_indices(p: np.ndarray, m: int) -> np.ndarray:
    return np.minimum((p * m).astype(int), m - 1)


def default_alpha(m: int, n: int, c: float = 0.5) -> float:
    """Multiaccuracy tolerance ``c * sqrt(log(m) / n)``."""
    if m < 2:
        return c / math.sqrt(n)
    return c * math.sqrt(math.log(m) / n)


def calma_boost(
    base: BasePredictorSet,
    aux: AuxiliaryClass,
    data: Dataset,
    alpha: float,
    max_iters: int = 100_000,
    init_value: float = 0.5,
) -> BucketedPredictor:
    """Alternate residual-correction and recalibration until both criteria hold.

    A correction step picks the auxiliary member with the largest violation
    ``|E_n[g(X)(Y - p(X))]| > alpha`` and moves the score by ``alpha/2`` along
    it; each such step lowers the squared residual by at least ``alpha^2/4``,
    which bounds the total number of correction steps.  A calibration step
    replaces each width-1/m bucket by its empirical label mean.  The loop
    stops when no violation survives a calibration step; if ``max_iters``
    correction steps are exhausted first, the best calibrated iterate is
    returned with ``warning=True``.
    """
    if alpha <= 0:
        raise ValidationError(f"multiaccuracy tolerance must be positive, got {alpha}")
    if data.n == 0:
        raise ValidationError("cannot fit on an empty dataset")
    m = base.grid.m
    lam = alpha / 2.0
    g_matrix = aux.evaluate(data.X)
    y = data.y.astype(float)

    p = np.full(data.n, float(init_value))
    ops: list[tuple] = []
    initial_potential = float(np.mean((y - p) ** 2))
    step_budget = int(math.ceil(initial_potential / (lam * alpha - lam * lam))) + 1

    best_ops: tuple | None = None
    best_violation = np.inf
    ma_steps = 0
    exhausted = False
    while True:
        # (a) push every reweighted residual below the tolerance
        while ma_steps < max_iters:
            corr = g_matrix.T @ (y - p) / data.n
            worst = int(np.argmax(np.abs(corr)))
            if abs(corr[worst]) <= alpha:
                break
            delta = lam * math.copysign(1.0, corr[worst])
            p = np.clip(p + delta * g_matrix[:, worst], 0.0, 1.0)
            ops.append(("ma", worst, delta))
            ma_steps += 1
            if ma_steps > step_budget:
                raise NumericError(
                    "correction steps exceeded the potential-decrease budget"
                )
        else:
            exhausted = True
        # (b) recalibrate on width-1/m buckets
        buckets = _bucket_indices(p, m)
        table = np.full(m, np.nan)
        counts = np.bincount(buckets, minlength=m)
        sums = np.bincount(buckets, weights=y, minlength=m)
        hit = counts > 0
        table[hit] = sums[hit] / counts[hit]
        p = table[buckets]
        ops.append(("cal", tuple(table.tolist())))

        violation = float(np.abs(g_matrix.T @ (y - p)).max() / data.n)
        if violation < best_violation:
            best_violation = violation
            best_ops = tuple(ops)
        if violation <= alpha:
            return BucketedPredictor(aux, m, float(init_value), tuple(ops), warning=False)
        if exhausted or ma_steps >= max_iters:
            return BucketedPredictor(aux, m, float(init_value), best_ops, warning=True)


@dataclass(frozen=True)
class CalmaGamePredictor:
    """Round-averaged randomized predictor from the calibration game.

    Stores, per round, the net auxiliary weighting ``d`` (positive minus
    negated copies) and the sign-class profile ``c`` so new covariates can be
    answered by replaying the per-round best responses.  ``inner_values``
    records the per-round inner optima for auditing against the 1/m cap.
    """

    aux: AuxiliaryClass | None
    m: int
    eta: float
    d_history: np.ndarray  # (n, |aux|)
    c_history: np.ndarray  # (n, m)
    inner_values: np.ndarray  # (n,)

    def support_values(self) -> np.ndarray:
        return np.arange(1, self.m + 1) / self.m

    def predict_dist_matrix(self, X: np.ndarray) -> np.ndarray:
        """Averaged best-response law over ``{1/m, ..., 1}`` per query row."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n_queries = X.shape[0]
        if self.aux is None:
            abar = np.zeros(self.c_history.shape[0])
            row = _averaged_best_response(abar, self.c_history, self.m)[0]
            return np.tile(row, (n_queries, 1))
        g_matrix = self.aux.evaluate(X)
        out = np.empty((n_queries, self.m))
        for k in range(n_queries):
            abar = self.d_history @ g_matrix[k]
            out[k] = _averaged_best_response(abar, self.c_history, self.m)[0]
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_dist_matrix(X) @ self.support_values()

    def to_config(self) -> dict:
        return {
            "kind": "calma-game",
            "m": self.m,
            "eta": self.eta,
            "d_history": self.d_history.tolist(),
            "c_history": self.c_history.tolist(),
            "inner_values": self.inner_values.tolist(),
        }

    @classmethod
    def from_config(cls, config: dict, aux: "AuxiliaryClass | None") -> "CalmaGamePredictor":
        d_history = np.asarray(config["d_history"], dtype=float)
        if d_history.size and aux is not None and d_history.shape[1] != len(aux):
            raise ValidationError("auxiliary class does not match the stored weighting")
        return cls(
            aux,
            int(config["m"]),
            float(config["eta"]),
            d_history,
            np.asarray(config["c_history"], dtype=float),
            np.asarray(config["inner_values"], dtype=float),
        )


def _best_response(abar: float, c: np.ndarray, m: int) -> tuple[np.ndarray, float]:
    """Exact minimizer of ``max_{p_y in [0,1]}`` of the mixed objective.

    For a law P over ``v_j = j/m`` the objective is affine in ``p_y`` with
    slope ``alpha(P) = abar + P @ c`` and intercept ``beta(P) = -sum_j P_j v_j
    (abar + c_j)``, so its max sits at ``p_y in {0, 1}`` and the outer min is
    over the max of two affine functionals: scan the simplex vertices and the
    pairwise points where the two pieces cross.
    """
    v = np.arange(1, m + 1) / m
    alpha = abar + c
    beta = -v * (abar + c)
    values = np.maximum(beta, alpha + beta)
    best_j = int(np.argmin(values))
    best_value = float(values[best_j])
    probs = np.zeros(m)
    probs[best_j] = 1.0
    denom = alpha[:, None] - alpha[None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        rho = np.where(np.abs(denom) > 1e-15, alpha[:, None] / denom, np.nan)
    jj, kk = np.nonzero((rho >= 0.0) & (rho <= 1.0))
    for j, k in zip(jj, kk):
        r = rho[j, k]
        value = float((1.0 - r) * beta[j] + r * beta[k])
        if value < best_value - 1e-15:
            best_value = value
            probs = np.zeros(m)
            probs[j] = 1.0 - r
            probs[k] = r
    return probs, best_value


def _averaged_best_response(abar: np.ndarray, c_history: np.ndarray, m: int) -> tuple[np.ndarray, np.ndarray]:
    n = c_history.shape[0]
    avg = np.zeros(m)
    values = np.empty(n)
    for t in range(n):
        probs, value = _best_response(float(abar[t]), c_history[t], m)
        avg += probs
        values[t] = value
    return avg / n, values


def calma_game(
    data: Dataset, aux: AuxiliaryClass | None, m: int, eta: float
) -> CalmaGamePredictor:
    """Hedge over the signed auxiliary class plus all output-grid sign functions.

    ``aux=None`` runs with the sign class alone (pure calibration).  Every
    per-round inner optimum is checked against the ``1/m`` cap.  The sign
    class has ``2^m`` members, so resolutions above ``CALMA_GAME_MAX_M`` are
    rejected; use ``calma_boost`` for larger grids.
    """
    if m > CALMA_GAME_MAX_M:
        raise ValidationError(
            f"sign-class enumeration caps the grid at m={CALMA_GAME_MAX_M}; "
            "use calma_boost for larger resolutions"
        )
    if m < 1:
        raise ValidationError("grid resolution must be positive")
    if data.n == 0:
        raise ValidationError("cannot fit on an empty dataset")
    if eta <= 0:
        raise ValidationError(f"learning rate must be positive, got {eta}")

    n_aux = len(aux) if aux is not None else 0
    signs = np.array(
        [[1 if (s >> j) & 1 else -1 for j in range(m)] for s in range(2**m)],
        dtype=np.int8,
    )
    g_matrix = aux.evaluate(data.X) if aux is not None else np.zeros((data.n, 0))
    v = np.arange(1, m + 1) / m
    y = data.y.astype(float)

    n_objectives = 2 * n_aux + signs.shape[0]
    log_q = np.full(n_objectives, -math.log(n_objectives))
    d_history = np.empty((data.n, n_aux))
    c_history = np.empty((data.n, m))
    inner_values = np.empty(data.n)

    for t in range(data.n):
        log_q -= log_q.max()
        w = np.exp(log_q)
        q = w / w.sum()
        q_pos, q_neg, q_sign = q[:n_aux], q[n_aux : 2 * n_aux], q[2 * n_aux :]
        d = q_pos - q_neg
        c = q_sign @ signs
        d_history[t] = d
        c_history[t] = c

        abar = float(d @ g_matrix[t])
        probs, value = _best_response(abar, c, m)
        inner_values[t] = value
        if value > 1.0 / m + 1e-12:
            raise NumericError(
                f"inner best-response value {value} exceeded the 1/m cap at round {t}"
            )

        mean_p = float(probs @ v)
        payoff_aux = g_matrix[t] * (y[t] - mean_p)
        payoff_signs = signs @ (probs * (y[t] - v))
        payoff = np.concatenate([payoff_aux, -payoff_aux, payoff_signs])
        log_q = log_q + eta * payoff

    return CalmaGamePredictor(aux, m, eta, d_history, c_history, inner_values)


def default_game_eta(n_aux: int, m: int, n: int) -> float:
    return math.sqrt((math.log(max(n_aux, 2)) + m) / n)
