"""Per-node grouped linear regression built from time-series data.

For node ``i`` with lag order ``k`` the target stacks ``y_i(t) .. y_i(k+1)``
(descending) and the dictionary has one block per candidate regulator.
Output blocks hold negated lagged outputs, input blocks hold lagged inputs.
Within a block, column ``j`` (1-based) multiplies the coefficient of
``z^-(k-j+1)``: the left-most column is the deepest lag, the right-most is
lag one.  NARX problems replace (or extend) the linear blocks with basis
functions of one-step-lagged regulator values.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, EmptyDictionary, InsufficientData
from .model import ArxNetwork, TimeSeriesData


@dataclass(frozen=True)
class GroupStructure:
    """Partition of the weight vector into contiguous regulator groups."""

    group_sizes: tuple[int, ...]
    group_labels: tuple[tuple[str, int], ...]

    def __post_init__(self):
        if len(self.group_sizes) != len(self.group_labels):
            raise DimensionMismatch("one label per group required")
        if any(s < 1 for s in self.group_sizes):
            raise ValueError("group sizes must be >= 1")

    @property
    def n_groups(self) -> int:
        return len(self.group_sizes)

    @property
    def dim(self) -> int:
        return int(sum(self.group_sizes))

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.group_sizes)]).astype(int)

    def slices(self) -> list[slice]:
        starts = self.starts
        return [slice(starts[r], starts[r + 1]) for r in range(self.n_groups)]

    @property
    def group_of(self) -> np.ndarray:
        """Group index of every column."""
        return np.repeat(np.arange(self.n_groups), self.group_sizes)

    def expand(self, per_group: np.ndarray) -> np.ndarray:
        """Broadcast a per-group vector to a per-column vector."""
        return np.repeat(np.asarray(per_group, dtype=float), self.group_sizes)

    def group_norms(self, w: np.ndarray) -> np.ndarray:
        w = np.asarray(w, dtype=float)
        return np.array([np.linalg.norm(w[sl]) for sl in self.slices()])

    def split(self, w: np.ndarray) -> list[np.ndarray]:
        return [np.asarray(w)[sl] for sl in self.slices()]


@dataclass(frozen=True)
class RegressionProblem:
    """Target vector, dictionary matrix and group bookkeeping for one node."""

    y: np.ndarray
    phi: np.ndarray
    groups: GroupStructure
    epsilon: np.ndarray
    node_index: int
    k: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        phi = np.asarray(self.phi, dtype=float)
        eps = np.asarray(self.epsilon, dtype=float)
        if phi.ndim != 2 or y.ndim != 1 or phi.shape[0] != y.shape[0]:
            raise DimensionMismatch("phi rows must match y")
        if phi.shape[1] != self.groups.dim or eps.shape != (phi.shape[1],):
            raise DimensionMismatch("columns, groups and epsilon must agree")
        for name, arr in (("y", y), ("phi", phi), ("epsilon", eps)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def n_rows(self) -> int:
        return self.phi.shape[0]

    @property
    def dim(self) -> int:
        return self.phi.shape[1]


def _uniform_epsilon(dim: int, epsilon_norm: float) -> np.ndarray:
    if epsilon_norm == 0.0:
        return np.zeros(dim)
    return np.full(dim, epsilon_norm / np.sqrt(dim))


def _lag_window(signal: np.ndarray, row_times: np.ndarray, k: int) -> np.ndarray:
    """Rows of lagged samples: entry (r, j) is ``signal[row_times[r]-k+j]``."""
    idx = row_times[:, None] - k + np.arange(k)[None, :]
    return signal[idx]


def build_arx_regression(
    data: TimeSeriesData,
    node: int,
    k: int,
    epsilon_norm: float = 0.0,
) -> RegressionProblem:
    """Assemble the lag-``k`` linear regression for one node.

    Node blocks carry negated lagged outputs and input blocks lagged
    inputs; rows run from the latest target time downwards.
    """
    if not 0 <= node < data.p:
        raise ValueError(f"node {node} outside [0, {data.p})")
    if k < 1:
        raise ValueError("k must be >= 1")
    if data.t - k < 1:
        raise InsufficientData(f"t={data.t} leaves no rows at k={k}")
    row_times = np.arange(data.t - 1, k - 1, -1)
    blocks = [-_lag_window(data.y[r], row_times, k) for r in range(data.p)]
    blocks += [_lag_window(data.u[s], row_times, k) for s in range(data.m)]
    labels = [("node", r) for r in range(data.p)] + [("input", s) for s in range(data.m)]
    groups = GroupStructure(
        group_sizes=tuple([k] * (data.p + data.m)),
        group_labels=tuple(labels),
    )
    return RegressionProblem(
        y=data.y[node, row_times],
        phi=np.hstack(blocks),
        groups=groups,
        epsilon=_uniform_epsilon(groups.dim, epsilon_norm),
        node_index=node,
        k=k,
    )


@dataclass(frozen=True)
class BasisFunction:
    """One dictionary entry: saturating kinetics or a raw linear term."""

    kind: str
    param: float = 0.0

    def __post_init__(self):
        if self.kind not in ("linear", "hill_act", "hill_rep", "mm_act", "mm_rep"):
            raise ValueError(f"unknown basis kind {self.kind!r}")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "linear":
            return x
        if self.kind == "hill_act":
            xn = x**self.param
            return xn / (1.0 + xn)
        if self.kind == "hill_rep":
            return 1.0 / (1.0 + x**self.param)
        if self.kind == "mm_act":
            return x / (x + self.param)
        return self.param / (x + self.param)

    def describe(self) -> str:
        return self.kind if self.kind == "linear" else f"{self.kind}({self.param:g})"


@dataclass(frozen=True)
class BasisDictionary:
    """Per-regulator basis template.

    ``include_self`` controls whether the target node appears among its own
    candidate regulators.
    """

    descriptors: tuple[BasisFunction, ...]
    include_self: bool = True

    def __post_init__(self):
        if len(set((d.kind, d.param) for d in self.descriptors)) != len(self.descriptors):
            raise ValueError("duplicate descriptors in dictionary")

    @property
    def size(self) -> int:
        return len(self.descriptors)


def hill_dictionary(max_hill: int) -> BasisDictionary:
    """Linear term plus activation/repression Hill pairs up to ``max_hill``."""
    if max_hill < 1:
        raise ValueError("max_hill must be >= 1")
    descriptors = [BasisFunction("linear")]
    for n in range(1, max_hill + 1):
        descriptors.append(BasisFunction("hill_act", float(n)))
        descriptors.append(BasisFunction("hill_rep", float(n)))
    return BasisDictionary(tuple(descriptors), include_self=True)


def mm_dictionary(k_grid: Sequence[float]) -> BasisDictionary:
    """Michaelis-Menten activation/repression pairs over a grid of constants.

    The target gene is excluded from its own regulator set.
    """
    grid = [float(v) for v in k_grid]
    if not grid or any(v <= 0 for v in grid):
        raise ValueError("k_grid must be nonempty with positive entries")
    descriptors = []
    for const in grid:
        descriptors.append(BasisFunction("mm_act", const))
        descriptors.append(BasisFunction("mm_rep", const))
    return BasisDictionary(tuple(descriptors), include_self=False)


def build_narx_regression(
    data: TimeSeriesData,
    node: int,
    dictionary: BasisDictionary,
    lag: int = 1,
    include_linear_lags: bool = False,
    known_input: int | None = None,
    epsilon_norm: float = 0.0,
) -> RegressionProblem:
    """Assemble a one-step NARX regression from a basis dictionary.

    Every candidate regulator contributes one group of dictionary columns
    evaluated on its ``lag``-step-delayed trajectory.  Optionally the plain
    negated linear lag blocks are prepended, and a known input signal adds a
    single extra column.
    """
    if lag < 1:
        raise ValueError("lag must be >= 1")
    if dictionary.size == 0:
        raise EmptyDictionary("dictionary has no basis functions")
    if not 0 <= node < data.p:
        raise ValueError(f"node {node} outside [0, {data.p})")
    if data.t - lag < 1:
        raise InsufficientData(f"t={data.t} leaves no rows at lag={lag}")
    row_times = np.arange(data.t - 1, lag - 1, -1)
    blocks: list[np.ndarray] = []
    sizes: list[int] = []
    labels: list[tuple[str, int]] = []
    if include_linear_lags:
        for r in range(data.p):
            blocks.append(-_lag_window(data.y[r], row_times, lag))
            sizes.append(lag)
            labels.append(("lag", r))
    regulators = [r for r in range(data.p) if dictionary.include_self or r != node]
    for r in regulators:
        lagged = data.y[r, row_times - lag]
        blocks.append(np.column_stack([f.evaluate(lagged) for f in dictionary.descriptors]))
        sizes.append(dictionary.size)
        labels.append(("node", r))
    if known_input is not None:
        if not 0 <= known_input < data.m:
            raise ValueError(f"input {known_input} outside [0, {data.m})")
        blocks.append(data.u[known_input, row_times - lag][:, None])
        sizes.append(1)
        labels.append(("input", known_input))
    groups = GroupStructure(tuple(sizes), tuple(labels))
    return RegressionProblem(
        y=data.y[node, row_times],
        phi=np.hstack(blocks),
        groups=groups,
        epsilon=_uniform_epsilon(groups.dim, epsilon_norm),
        node_index=node,
        k=lag,
    )


def true_arx_weight_vector(net: ArxNetwork, node: int, k: int) -> np.ndarray:
    """Zero-padded ground-truth weights of one node in the lag-``k`` layout.

    Column ``j`` (1-based) of block ``r`` maps to the coefficient of
    ``z^-(k-j+1)`` of the corresponding polynomial entry.
    """
    if k < max(net.order_a, net.order_b if net.m else 0):
        raise ValueError("k must cover the true polynomial orders")
    w = np.zeros(k * (net.p + net.m))
    for r in range(net.p):
        for jj in range(k):
            lag = k - jj  # 1-based coefficient index jj+1 has lag k-jj
            if lag <= net.order_a:
                w[r * k + jj] = net.a_coeffs[node, r, lag - 1]
    for s in range(net.m):
        for jj in range(k):
            lag = k - jj
            if lag <= net.order_b:
                w[(net.p + s) * k + jj] = net.b_coeffs[node, s, lag - 1]
    return w
