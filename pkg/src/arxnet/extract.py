"""Assemble per-node inference results into a network estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import Topology
from .solvers import InferenceResult

REL_LINK_THRESHOLD = 1e-3


@dataclass(frozen=True)
class NetworkEstimate:
    """Thresholded topology plus per-link confidences and orders."""

    topology: Topology
    a_confidence: np.ndarray
    b_confidence: np.ndarray
    a_orders: np.ndarray
    b_orders: np.ndarray

    def to_json_dict(self) -> dict:
        return {
            "p": self.topology.p,
            "m": self.topology.m,
            "a_edges": self.topology.a_edges.astype(int).tolist(),
            "b_edges": self.topology.b_edges.astype(int).tolist(),
            "a_confidence": self.a_confidence.tolist(),
            "b_confidence": self.b_confidence.tolist(),
            "a_orders": self.a_orders.tolist(),
            "b_orders": self.b_orders.tolist(),
        }


def extract_network(
    results: list[InferenceResult],
    rel_threshold: float = REL_LINK_THRESHOLD,
) -> NetworkEstimate:
    """Threshold group norms into links and attach confidences and orders.

    A group is a link when its norm exceeds ``rel_threshold`` times the
    node's largest group norm; the confidence of a link is its share of the
    node's total weight norm.  Groups referring to the same regulator (for
    example a linear-lag block plus a basis block) are combined by their
    joint norm.
    """
    m = 0
    p = len(results)
    for res in results:
        p = max(p, res.node_index + 1)
        for kind, idx in res.groups.group_labels:
            if kind == "input":
                m = max(m, idx + 1)
            else:
                p = max(p, idx + 1)
    a_sq = np.zeros((p, p))
    b_sq = np.zeros((p, m))
    a_orders = np.zeros((p, p), dtype=int)
    b_orders = np.zeros((p, m), dtype=int)
    a_conf = np.zeros((p, p))
    b_conf = np.zeros((p, m))
    a_edges = np.zeros((p, p), dtype=bool)
    b_edges = np.zeros((p, m), dtype=bool)
    for res in results:
        i = res.node_index
        norms = res.group_norms
        for r, (kind, idx) in enumerate(res.groups.group_labels):
            if kind == "input":
                b_sq[i, idx] += norms[r] ** 2
                b_orders[i, idx] = max(b_orders[i, idx], int(res.estimated_orders[r]))
            else:
                a_sq[i, idx] += norms[r] ** 2
                a_orders[i, idx] = max(a_orders[i, idx], int(res.estimated_orders[r]))
        total = float(np.linalg.norm(res.w))
        link_norms = np.concatenate([np.sqrt(a_sq[i]), np.sqrt(b_sq[i])])
        top = link_norms.max() if link_norms.size else 0.0
        if total > 0:
            a_conf[i] = np.sqrt(a_sq[i]) / total
            b_conf[i] = np.sqrt(b_sq[i]) / total
        if top > 0:
            a_edges[i] = np.sqrt(a_sq[i]) > rel_threshold * top
            b_edges[i] = np.sqrt(b_sq[i]) > rel_threshold * top
    a_orders[~a_edges] = 0
    b_orders[~b_edges] = 0
    return NetworkEstimate(
        topology=Topology(a_edges=a_edges, b_edges=b_edges),
        a_confidence=a_conf,
        b_confidence=b_conf,
        a_orders=a_orders,
        b_orders=b_orders,
    )
