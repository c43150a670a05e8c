"""Scoring of inferred topologies and parameter estimates."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateTruth, DimensionMismatch
from .model import Topology

SCOPE_OFFDIAG_A = "offdiag_a"
SCOPE_A_AND_B = "a_and_b"


@dataclass(frozen=True)
class TopologyScore:
    tpr: float
    prec: float
    tp: int
    fp: int
    fn: int

    @property
    def success(self) -> bool:
        return self.tpr == 1.0 and self.prec == 1.0


@dataclass(frozen=True)
class CurveScore:
    auroc: float
    auprec: float
    roc_points: np.ndarray  # (threshold, fpr, tpr) rows
    pr_points: np.ndarray   # (threshold, recall, precision) rows


def _scope_entries(top: Topology, scope: str) -> np.ndarray:
    if scope == SCOPE_OFFDIAG_A:
        mask = ~np.eye(top.p, dtype=bool)
        return top.a_edges[mask]
    if scope == SCOPE_A_AND_B:
        return np.concatenate([top.a_edges.ravel(), top.b_edges.ravel()])
    raise ValueError(f"unknown scope {scope!r}")


def score_topology(
    inferred: Topology,
    truth: Topology,
    scope: str = SCOPE_OFFDIAG_A,
) -> TopologyScore:
    """Link-level true-positive rate and precision over the chosen scope.

    Empty denominators score 1.0: a vacuous truth is fully recovered and an
    empty estimate makes no false claims.
    """
    if inferred.a_edges.shape != truth.a_edges.shape or inferred.b_edges.shape != truth.b_edges.shape:
        raise DimensionMismatch("topology shapes differ")
    est = _scope_entries(inferred, scope)
    ref = _scope_entries(truth, scope)
    tp = int(np.sum(est & ref))
    fp = int(np.sum(est & ~ref))
    fn = int(np.sum(~est & ref))
    tpr = tp / (tp + fn) if tp + fn > 0 else 1.0
    prec = tp / (tp + fp) if tp + fp > 0 else 1.0
    return TopologyScore(tpr=tpr, prec=prec, tp=tp, fp=fp, fn=fn)


def nrmse(w_est: np.ndarray, w_true: np.ndarray) -> float:
    """Root-mean-square error normalised by the mean absolute true weight."""
    w_est = np.asarray(w_est, dtype=float)
    w_true = np.asarray(w_true, dtype=float)
    if w_est.shape != w_true.shape:
        raise DimensionMismatch("weight vectors differ in length")
    scale = float(np.sum(np.abs(w_true)))
    if scale == 0.0:
        raise DegenerateTruth("true weight vector is identically zero")
    n = w_true.size
    return float(np.linalg.norm(w_est - w_true)) * np.sqrt(n) / scale


def rank_curves(scores: np.ndarray, labels: np.ndarray) -> CurveScore:
    """ROC and precision-recall curves from a confidence ranking.

    The threshold sweeps the distinct scores from high to low with ties
    grouped into a single step; areas use the trapezoidal rule.  The
    precision-recall curve is anchored at zero recall with the precision of
    the top-scoring group.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    labels = np.asarray(labels, dtype=bool).ravel()
    if scores.shape != labels.shape:
        raise DimensionMismatch("scores and labels differ in length")
    pos = int(labels.sum())
    neg = labels.size - pos
    if pos == 0 or neg == 0:
        raise ValueError("need at least one positive and one negative edge")
    order = np.argsort(-scores, kind="stable")
    sorted_scores = scores[order]
    sorted_labels = labels[order]
    cum_tp = np.cumsum(sorted_labels)
    cum_fp = np.cumsum(~sorted_labels)
    # last index of every tie block
    distinct = np.nonzero(np.diff(np.append(sorted_scores, np.nan)))[0]
    thr = sorted_scores[distinct]
    tp = cum_tp[distinct]
    fp = cum_fp[distinct]
    tpr = tp / pos
    fpr = fp / neg
    recall = tpr
    precision = tp / np.maximum(tp + fp, 1)
    roc_x = np.concatenate([[0.0], fpr])
    roc_y = np.concatenate([[0.0], tpr])
    auroc = float(np.trapezoid(roc_y, roc_x))
    pr_x = np.concatenate([[0.0], recall])
    pr_y = np.concatenate([[precision[0]], precision])
    auprec = float(np.trapezoid(pr_y, pr_x))
    roc_points = np.column_stack([thr, fpr, tpr])
    pr_points = np.column_stack([thr, recall, precision])
    return CurveScore(auroc=auroc, auprec=auprec, roc_points=roc_points, pr_points=pr_points)


def offdiag_scores_and_labels(
    confidence: np.ndarray,
    truth: Topology,
) -> tuple[np.ndarray, np.ndarray]:
    """Flatten an off-diagonal confidence matrix against the true links."""
    conf = np.asarray(confidence, dtype=float)
    if conf.shape != truth.a_edges.shape:
        raise DimensionMismatch("confidence matrix must match the topology")
    mask = ~np.eye(truth.p, dtype=bool)
    return conf[mask], truth.a_edges[mask]
