"""Direct, unrandomized ensembling of per-threshold predictors.

``merge`` joins two predictors whose strengths cover disjoint theta ranges by
iteratively reassigning their disagreement events, certifying one theta per
iteration.  ``ensemble_scheme`` applies it pairwise over log2(m) rounds to
collapse a full base set into a single deterministic predictor.

All predictions here live on the integer grid (index j for value j/m) and
thetas are handled by index (i for the i-th grid theta), so every comparison
in the loop is exact integer arithmetic.  Disagreement events are predicates
over pairs of child outputs, not sample subsets, which lets a merge be
audited cell by cell and applied to unseen covariates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import NumericError, ValidationError
from .grids import ThetaGrid
from .predictors import BasePredictorSet, Dataset, RecodedPredictor


@runtime_checkable
class GridPredictor(Protocol):
    """Deterministic predictor with outputs on a declared set of grid indices."""

    @property
    def support_indices(self) -> tuple: ...

    def predict_indices(self, X: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class GridLeaf:
    """Adapter exposing a recoded base member as a grid-indexed predictor."""

    member: RecodedPredictor

    @property
    def theta_indices(self) -> tuple:
        return (self.member.theta_index,)

    @property
    def support_indices(self) -> tuple:
        i = self.member.theta_index
        return (i - 1, i)

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        i = self.member.theta_index
        return np.where(self.member.is_low(X), i - 1, i)

    def to_config(self) -> dict:
        return {"kind": "leaf", "theta_index": self.member.theta_index}


@dataclass(frozen=True)
class MergeNode:
    """One merge of a high-range child with a low-range child.

    ``assignment[a, b]`` says whether support pair ``(support_high[a],
    support_low[b])`` resolves to the low child.  ``switch_low`` and
    ``switch_high`` record the theta indices at which the merge loop changed
    direction; together with the children's theta ranges they determine the
    assignment exactly (see ``switch_structure_region``).
    """

    child_high: GridPredictor
    child_low: GridPredictor
    theta_high_indices: tuple
    theta_low_indices: tuple
    support_high: tuple
    support_low: tuple
    assignment: np.ndarray  # bool, (len(support_high), len(support_low)); True = use_low
    switch_low: tuple
    switch_high: tuple
    m: int

    def __post_init__(self):
        assignment = np.asarray(self.assignment, dtype=bool)
        if assignment.shape != (len(self.support_high), len(self.support_low)):
            raise ValidationError("assignment table shape does not match child supports")
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)

    @property
    def theta_indices(self) -> tuple:
        return self.theta_low_indices + self.theta_high_indices

    @property
    def support_indices(self) -> tuple:
        sup_h = np.asarray(self.support_high)
        sup_l = np.asarray(self.support_low)
        chosen = np.where(self.assignment, sup_l[None, :], sup_h[:, None])
        return tuple(int(v) for v in np.unique(chosen))

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        vh = self.child_high.predict_indices(X)
        vl = self.child_low.predict_indices(X)
        pos_h = np.searchsorted(np.asarray(self.support_high), vh)
        pos_l = np.searchsorted(np.asarray(self.support_low), vl)
        return np.where(self.assignment[pos_h, pos_l], vl, vh)

    def to_config(self) -> dict:
        return {
            "kind": "merge",
            "theta_high_set": list(self.theta_high_indices),
            "theta_low_set": list(self.theta_low_indices),
            "support_high": list(self.support_high),
            "support_low": list(self.support_low),
            "assignment": self.assignment.astype(int).tolist(),
            "switch_points": {"low": list(self.switch_low), "high": list(self.switch_high)},
            "children": [self.child_high.to_config(), self.child_low.to_config()],
        }


def _statistic_numerator(
    n0: np.ndarray, n1: np.ndarray, event: np.ndarray, theta_index: int, m: int
) -> int:
    """Exact numerator of E_n[(loss(0,Y) - loss(1,Y)) 1{event}] over 2*m*n.

    With theta = (2i-1)/(2m), the statistic is
    ((2m - 2i + 1) * n1(event) - (2i - 1) * n0(event)) / (2*m*n); the integer
    numerator keeps the sign test exact when the buffer is zero.
    """
    c1 = 2 * m - 2 * theta_index + 1
    c0 = 2 * theta_index - 1
    return int(c1 * int(n1[event].sum()) - c0 * int(n0[event].sum()))


def merge(
    p_high: GridPredictor,
    p_low: GridPredictor,
    theta_high_set: Sequence[int],
    theta_low_set: Sequence[int],
    data: Dataset,
    epsilon: float,
    m: int,
) -> MergeNode:
    """Merge two grid predictors over their disagreement events.

    ``theta_high_set`` and ``theta_low_set`` are sorted 1-based theta indices
    with ``max(low) < min(high)``.  The loop starts from the high child,
    walks the low thetas downward and the high thetas upward, and flips the
    current disagreement event ``{v_h > theta_h, v_l <= theta_l}`` whenever
    the empirical statistic clears the ``epsilon`` buffer strictly.  Support
    pairs where the high child sits at or below ``min(theta_high_set)`` carry
    no signal from it and start on the low side, which reproduces the
    two-predictor warm-up rule exactly.

    Each theta is examined at most once, so the loop runs for at most
    ``len(theta_high_set) + len(theta_low_set)`` iterations.
    """
    ths = tuple(int(t) for t in theta_high_set)
    tls = tuple(int(t) for t in theta_low_set)
    if not ths or not tls:
        raise ValidationError("both theta sets must be nonempty")
    if list(ths) != sorted(set(ths)) or list(tls) != sorted(set(tls)):
        raise ValidationError("theta sets must be sorted and duplicate-free")
    if tls[-1] >= ths[0]:
        raise ValidationError("every low theta must precede every high theta")
    if data.n == 0:
        raise ValidationError("cannot merge on an empty dataset")
    if epsilon < 0:
        raise ValidationError(f"buffer must be nonnegative, got {epsilon}")

    sup_h = np.asarray(p_high.support_indices, dtype=int)
    sup_l = np.asarray(p_low.support_indices, dtype=int)
    min_h, max_l = ths[0], tls[-1]
    # v > theta_i on the grid means v >= i; v <= theta_i means v < i.
    if sup_h.min() < max_l:
        raise ValidationError("high child support must sit above every low theta")
    if sup_l.max() >= min_h:
        raise ValidationError("low child support must sit below every high theta")

    pos_h = np.searchsorted(sup_h, p_high.predict_indices(data.X))
    pos_l = np.searchsorted(sup_l, p_low.predict_indices(data.X))
    shape = (sup_h.size, sup_l.size)
    n0 = np.zeros(shape, dtype=np.int64)
    n1 = np.zeros(shape, dtype=np.int64)
    ones = data.y.astype(bool)
    np.add.at(n1, (pos_h[ones], pos_l[ones]), 1)
    np.add.at(n0, (pos_h[~ones], pos_l[~ones]), 1)

    # High-child outputs at or below its lowest theta carry no high-side
    # signal; those rows resolve to the low child from the start.
    use_low = np.zeros(shape, dtype=bool)
    use_low[(sup_h < min_h), :] = True

    eps_numer = float(epsilon) * (2 * m * data.n)
    hi = 0
    lo = len(tls) - 1
    going_low = True
    switch_low: list[int] = []
    switch_high: list[int] = []
    iterations = 0
    cap = len(ths) + len(tls)
    while hi < len(ths) and lo >= 0:
        iterations += 1
        if iterations > cap:
            raise NumericError("merge failed to terminate within its iteration budget")
        th, tl = ths[hi], tls[lo]
        event = (sup_h[:, None] >= th) & (sup_l[None, :] < tl)
        if going_low:
            numer = _statistic_numerator(n0, n1, event, tl, m)
            if numer < -eps_numer:
                use_low[event] = True
                switch_low.append(tl)
                hi += 1
                going_low = False
            else:
                lo -= 1
        else:
            numer = -_statistic_numerator(n0, n1, event, th, m)
            if numer < -eps_numer:
                use_low[event] = False
                switch_high.append(th)
                lo -= 1
                going_low = True
            else:
                hi += 1

    node = MergeNode(
        child_high=p_high,
        child_low=p_low,
        theta_high_indices=ths,
        theta_low_indices=tls,
        support_high=tuple(int(v) for v in sup_h),
        support_low=tuple(int(v) for v in sup_l),
        assignment=use_low,
        switch_low=tuple(switch_low),
        switch_high=tuple(switch_high),
        m=m,
    )
    verify_switch_structure(node)
    return node


def switch_structure_region(node: MergeNode) -> np.ndarray:
    """Use-low region implied by the recorded switch points.

    The region is the no-signal band of the high child plus one rectangle per
    recorded low switch: the i-th low switch at theta index ``L_i`` grabbed
    ``{v_h > H_{i-1}, v_l <= L_i}`` where ``H_0 = min(theta_high)`` and
    ``H_i`` is the i-th high switch, and the i-th high switch (when it
    happened) carved ``{v_h > H_i}`` back out of it.
    """
    sup_h = np.asarray(node.support_high)
    sup_l = np.asarray(node.support_low)
    min_h = node.theta_high_indices[0]
    region = np.zeros((sup_h.size, sup_l.size), dtype=bool)
    region[(sup_h < min_h), :] = True
    bounds_h = (min_h,) + node.switch_high
    for i, tl in enumerate(node.switch_low):
        lower = bounds_h[i]
        rect = (sup_h[:, None] >= lower) & (sup_l[None, :] < tl)
        if i < len(node.switch_high):
            rect &= sup_h[:, None] < node.switch_high[i]
        region |= rect
    return region


def verify_switch_structure(node: MergeNode) -> None:
    """Check that the stored assignment equals its switch-point reconstruction."""
    if not np.array_equal(switch_structure_region(node), node.assignment):
        raise NumericError("merge assignment does not match its switch-point structure")


@dataclass(frozen=True)
class MergedPredictor:
    """Balanced merge tree over the base members, in theta order."""

    root: GridPredictor
    grid: ThetaGrid

    def predict_indices(self, X: np.ndarray) -> np.ndarray:
        return self.root.predict_indices(np.atleast_2d(np.asarray(X, dtype=float)))

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_indices(X) / self.grid.m

    def to_config(self, base_ref: str | None = None) -> dict:
        config = {"kind": "direct", "m": self.grid.m, "tree": self.root.to_config()}
        if base_ref is not None:
            config["base_ref"] = base_ref
        return config

    @classmethod
    def from_config(cls, config: dict, base: BasePredictorSet) -> "MergedPredictor":
        def build(raw: dict) -> GridPredictor:
            if raw["kind"] == "leaf":
                return GridLeaf(base.members[int(raw["theta_index"]) - 1])
            node = MergeNode(
                child_high=build(raw["children"][0]),
                child_low=build(raw["children"][1]),
                theta_high_indices=tuple(raw["theta_high_set"]),
                theta_low_indices=tuple(raw["theta_low_set"]),
                support_high=tuple(raw["support_high"]),
                support_low=tuple(raw["support_low"]),
                assignment=np.asarray(raw["assignment"], dtype=bool),
                switch_low=tuple(raw["switch_points"]["low"]),
                switch_high=tuple(raw["switch_points"]["high"]),
                m=base.grid.m,
            )
            return node

        return cls(build(config["tree"]), base.grid)


def iter_merge_nodes(tree):
    """Yield every MergeNode under a merged predictor or subtree (for audits)."""
    stack = [tree.root if isinstance(tree, MergedPredictor) else tree]
    while stack:
        node = stack.pop()
        if isinstance(node, MergeNode):
            yield node
            stack.append(node.child_high)
            stack.append(node.child_low)


def ensemble_scheme(
    base: BasePredictorSet, data: Dataset, epsilon: float = 0.0, split: bool = False
) -> MergedPredictor:
    """Pair adjacent predictors and merge over log2(m) rounds.

    With ``split=True`` the data is split into one fold per round and round t
    only sees fold t, which is what the generalization analysis wants; the
    default reuses the full dataset every round, which works better at the
    sample sizes this package targets.
    """
    m = base.m
    if m & (m - 1):
        raise ValidationError(
            f"ensembling needs a power-of-two grid resolution, got m={m}"
        )
    rounds = m.bit_length() - 1
    current: list[GridPredictor] = [GridLeaf(mb) for mb in base.members]
    thetas: list[tuple] = [(i,) for i in range(1, m + 1)]
    if split and rounds > 0:
        if data.n < rounds:
            raise ValidationError(f"need at least {rounds} samples to split across rounds")
        folds = [data.subset(idx) for idx in np.array_split(np.arange(data.n), rounds)]
    for t in range(rounds):
        fold = folds[t] if split else data
        merged: list[GridPredictor] = []
        merged_thetas: list[tuple] = []
        for i in range(0, len(current), 2):
            low, high = current[i], current[i + 1]
            tl, th = thetas[i], thetas[i + 1]
            merged.append(merge(high, low, th, tl, fold, epsilon, m))
            merged_thetas.append(tl + th)
        current = merged
        thetas = merged_thetas
    return MergedPredictor(current[0], base.grid)


def evaluate_merged(mp: MergedPredictor, x: np.ndarray) -> float:
    """Deterministic merged prediction at one covariate."""
    return float(mp.predict(np.atleast_2d(np.asarray(x, dtype=float)))[0])
