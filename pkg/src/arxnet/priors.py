"""Hyperparameter state for the element/group sparse Gaussian priors.

Three prior modes are supported:

* ``COMBINED`` - element variances ``beta`` and group variances ``gamma``
  multiply into a joint prior; both sparsity levels are active.
* ``ELEMENT`` - per-coefficient variances only (classic sparse Bayesian
  learning); ``gamma`` is ignored.
* ``GROUP`` - one shared variance per regulator group; ``beta`` is ignored.

A coordinate with zero effective prior variance is pinned to zero and drops
out of every posterior computation.  Groups whose variance collapses are
flagged inactive and their stored values parked at a small floor so that
log-determinant bookkeeping stays finite; flagged values are never used as
divisors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .regression import GroupStructure

GROUP_PRUNE_FLOOR = 1e-14
LAMBDA_FLOOR = 1e-12


class PriorMode(Enum):
    COMBINED = "gesbl"
    ELEMENT = "sbl"
    GROUP = "gsbl"

    @classmethod
    def parse(cls, name: "PriorMode | str") -> "PriorMode":
        if isinstance(name, cls):
            return name
        try:
            return cls(str(name).lower())
        except ValueError:
            raise ValueError(f"unknown prior mode {name!r}") from None


@dataclass
class Hyperparameters:
    """Element variances, group variances and the noise variance."""

    beta: np.ndarray
    gamma: np.ndarray
    lam: float
    mode: PriorMode
    active_groups: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.beta = np.asarray(self.beta, dtype=float).copy()
        self.gamma = np.asarray(self.gamma, dtype=float).copy()
        if self.active_groups is None:
            self.active_groups = np.ones(self.gamma.shape[0], dtype=bool)
        else:
            self.active_groups = np.asarray(self.active_groups, dtype=bool).copy()
        if self.active_groups.shape != self.gamma.shape:
            raise ValueError("active_groups must match gamma")
        if np.any(self.beta < 0) or np.any(self.gamma < 0):
            raise ValueError("beta and gamma must be nonnegative")
        if not self.lam > 0:
            raise ValueError("lambda must be positive")

    def copy(self) -> "Hyperparameters":
        return Hyperparameters(
            self.beta, self.gamma, self.lam, self.mode, self.active_groups
        )

    def gamma_elementwise(self, groups: GroupStructure) -> np.ndarray:
        return groups.expand(self.gamma)

    def prior_var(self, groups: GroupStructure) -> np.ndarray:
        """Effective per-coordinate prior variance (zero means pinned)."""
        gmask = self.active_groups[groups.group_of]
        if self.mode is PriorMode.ELEMENT:
            raw = self.beta
        elif self.mode is PriorMode.GROUP:
            raw = self.gamma_elementwise(groups)
        else:
            ge = self.gamma_elementwise(groups)
            tot = self.beta + ge
            raw = np.where(tot > 0, self.beta * ge / np.where(tot > 0, tot, 1.0), 0.0)
        return np.where(gmask, raw, 0.0)

    def prune_group(self, r: int) -> None:
        """Flag group ``r`` inactive and park its variances at the floor."""
        self.active_groups[r] = False
        self.gamma[r] = GROUP_PRUNE_FLOOR


def init_hyperparameters(
    groups: GroupStructure,
    mode: PriorMode | str,
    lam: float,
    beta0: float = 1.0,
    gamma0: float = 1.0,
) -> Hyperparameters:
    """Flat-start hyperparameters (unit variances unless overridden)."""
    mode = PriorMode.parse(mode)
    return Hyperparameters(
        beta=np.full(groups.dim, float(beta0)),
        gamma=np.full(groups.n_groups, float(gamma0)),
        lam=max(float(lam), LAMBDA_FLOOR),
        mode=mode,
    )
