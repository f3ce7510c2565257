"""Shared independent oracles and fixtures for the test suite."""

from dataclasses import dataclass

import numpy as np

from omnipred import Dataset
from omnipred.losses import loss_values_vector, weighted_loss


def naive_value(q, lows, pairs, y, m):
    """Mixture objective at label y from first principles, via scalar losses.

    ``pairs`` lists (grid_index, probability); member i's value is its low or
    high support point.  Grid resolutions are powers of two so every value is
    an exact float.
    """
    total = 0.0
    for j, prob in pairs:
        inner = 0.0
        for i in range(1, m + 1):
            theta = (2 * i - 1) / (2 * m)
            f_value = (i - 1) / m if lows[i - 1] else i / m
            inner += q[i - 1] * (
                weighted_loss(theta, j / m, y) - weighted_loss(theta, f_value, y)
            )
        total += prob * inner
    return total


def oracle_minmax_value(q, lows, m):
    """Brute-force saddle value: simplex vertices plus pairwise crossing mixes."""
    a0 = [naive_value(q, lows, [(j, 1.0)], 0, m) for j in range(m + 1)]
    a1 = [naive_value(q, lows, [(j, 1.0)], 1, m) for j in range(m + 1)]
    best = min(max(a0[j], a1[j]) for j in range(m + 1))
    for j in range(m + 1):
        for k in range(j + 1, m + 1):
            dj, dk = a0[j] - a1[j], a0[k] - a1[k]
            if dj == dk:
                continue
            rho = dj / (dj - dk)
            if 0.0 <= rho <= 1.0:
                best = min(best, (1 - rho) * a0[j] + rho * a0[k])
    return best


def random_minmax_instance(rng, m):
    q = rng.dirichlet(np.full(m, rng.uniform(0.2, 3.0)))
    if rng.random() < 0.2:  # sparse mixtures hit the tie-handling paths
        mask = rng.random(m) < 0.5
        if mask.all():
            mask[rng.integers(m)] = False
        q = np.where(mask, 0.0, q)
        q = q / q.sum()
    lows = rng.random(m) < 0.5
    return q, lows


@dataclass(frozen=True)
class TableGridPredictor:
    """Grid predictor backed by a per-sample output table (x = row index)."""

    sup: tuple
    values: tuple

    @property
    def support_indices(self):
        return self.sup

    def predict_indices(self, X):
        idx = np.asarray(X, dtype=float).reshape(-1).astype(int)
        return np.asarray(self.values)[idx]

    def to_config(self):
        return {"kind": "table", "support": list(self.sup), "values": list(self.values)}


def index_data(y):
    return Dataset(np.arange(len(y), dtype=float), np.asarray(y))


def random_pair_instance(rng, n):
    """Random m=2 merge instance: high child on {1, 2}, low child on {0, 1}."""
    vh = rng.integers(1, 3, n)
    vl = rng.integers(0, 2, n)
    bias = rng.uniform(0.1, 0.9)
    y = (rng.random(n) < bias).astype(int)
    p_high = TableGridPredictor((1, 2), tuple(vh))
    p_low = TableGridPredictor((0, 1), tuple(vl))
    return p_high, p_low, index_data(y), vh, vl, y


def empirical_theta_loss(values, y, theta):
    return loss_values_vector(np.array([theta]), values, y)[:, 0].mean()
