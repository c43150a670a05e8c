"""ARX network models, random test-system generators and simulators.

A network of ``p`` nodes and ``m`` inputs is written as

    A(z) Y(t) = B(z) U(t) + E(t),
    A(z) = I + A_1 z^-1 + ... + A_na z^-na,
    B(z) = B_1 z^-1 + ... + B_nb z^-nb,

with ``E`` i.i.d. zero-mean Gaussian per node.  Coefficient tensors are
stored in lag order: ``a_coeffs[i, j, d]`` is the coefficient of ``z^-(d+1)``
in entry ``(i, j)`` of ``A(z)`` (the leading identity is implicit), and
likewise for ``b_coeffs``.
"""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, GenerationBudgetExceeded

ROOT_CAP = 0.95
# network generators use a tighter per-polynomial root cap, coupling gains
# bounded away from zero and from one, and a closed-loop pole margin: with
# unit-normal gains almost no draw at edge probability 0.4 is stable, and
# the few that are sit so close to the unit circle that simulated signals
# explode, while near-zero gains create links no method can detect
GEN_POLY_ROOT_CAP = 0.7
GEN_GAIN_RANGE = (0.2, 0.6)
GEN_RING_GAIN_RANGE = (0.7, 1.2)
GEN_STABILITY_MARGIN = 0.9
MAX_GENERATION_ATTEMPTS = 1000

# Discrete repressilator constants: per-state decay, Hill gains/exponents for
# the three transcription stages and linear gains for the three translation
# stages.  State order is (mRNA 1..3, protein 1..3).
REPRESSILATOR_DELTA = (0.3, 0.4, 0.5, 0.2, 0.4, 0.6)
REPRESSILATOR_ALPHA = (4.0, 3.0, 5.0)
REPRESSILATOR_BETA = (1.4, 1.5, 1.6)
REPRESSILATOR_HILL_N = (1, 2, 2)
# Regulator of each state: state i is driven by REPRESSILATOR_SOURCE[i]
# (Hill repression for the mRNAs, linear activation for the proteins).
REPRESSILATOR_SOURCE = (5, 3, 4, 0, 1, 2)


def _as_float_array(x, shape: tuple[int, ...], name: str) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.shape != shape:
        raise DimensionMismatch(f"{name}: expected shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


@dataclass(frozen=True)
class ArxNetwork:
    """Polynomial coefficients and noise levels of an ARX network.

    Parameters
    ----------
    p, m : int
        Number of nodes and of exogenous inputs (``m`` may be zero).
    a_coeffs : ndarray, shape (p, p, order_a)
        Lagged output coefficients; the implicit leading term of ``A`` is the
        identity and is not stored.
    b_coeffs : ndarray, shape (p, m, order_b)
        Lagged input coefficients.
    noise_var : ndarray, shape (p,)
        Process-noise variance per node.
    """

    p: int
    m: int
    a_coeffs: np.ndarray
    b_coeffs: np.ndarray
    noise_var: np.ndarray

    def __post_init__(self):
        if self.p < 1 or self.m < 0:
            raise ValueError("need p >= 1 and m >= 0")
        a = np.asarray(self.a_coeffs, dtype=float)
        if a.ndim != 3 or a.shape[0] != self.p or a.shape[1] != self.p or a.shape[2] < 1:
            raise DimensionMismatch(f"a_coeffs: expected (p, p, >=1), got {a.shape}")
        b = np.asarray(self.b_coeffs, dtype=float)
        if b.ndim != 3 or b.shape[0] != self.p or b.shape[1] != self.m:
            raise DimensionMismatch(f"b_coeffs: expected (p, m, nb), got {b.shape}")
        if self.m > 0 and b.shape[2] < 1:
            raise DimensionMismatch("b_coeffs needs order >= 1 when m > 0")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValueError("coefficients contain non-finite entries")
        nv = _as_float_array(self.noise_var, (self.p,), "noise_var")
        if np.any(nv < 0):
            raise ValueError("noise_var entries must be >= 0")
        for name, arr in (("a_coeffs", a), ("b_coeffs", b), ("noise_var", nv)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def order_a(self) -> int:
        return self.a_coeffs.shape[2]

    @property
    def order_b(self) -> int:
        return self.b_coeffs.shape[2] if self.m > 0 else 0

    def with_noise_var(self, noise_var) -> "ArxNetwork":
        """Return a copy with a different per-node noise variance."""
        nv = np.broadcast_to(np.asarray(noise_var, dtype=float), (self.p,)).copy()
        return ArxNetwork(self.p, self.m, self.a_coeffs, self.b_coeffs, nv)

    def to_json_dict(self) -> dict:
        return {
            "p": self.p,
            "m": self.m,
            "order_a": self.order_a,
            "order_b": self.order_b,
            "a_coeffs": self.a_coeffs.tolist(),
            "b_coeffs": self.b_coeffs.tolist(),
            "noise_var": self.noise_var.tolist(),
        }

    @classmethod
    def from_json_dict(cls, d: dict) -> "ArxNetwork":
        p, m = int(d["p"]), int(d["m"])
        a = np.asarray(d["a_coeffs"], dtype=float).reshape(p, p, int(d["order_a"]))
        b = np.asarray(d["b_coeffs"], dtype=float).reshape(p, m, max(int(d["order_b"]), 1))
        return cls(p, m, a, b, np.asarray(d["noise_var"], dtype=float))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_dict(), sort_keys=True))

    @classmethod
    def load(cls, path) -> "ArxNetwork":
        return cls.from_json_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TimeSeriesData:
    """Node trajectories ``y`` (p x t) and inputs ``u`` (m x t)."""

    y: np.ndarray
    u: np.ndarray
    t: int

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float)
        u = np.asarray(self.u, dtype=float)
        if u.size == 0:
            u = u.reshape(0, y.shape[1] if y.ndim == 2 else 0)
        if self.t < 1 or y.ndim != 2 or u.ndim != 2:
            raise DimensionMismatch("y and u must be 2-d with t >= 1")
        if y.shape[1] != self.t or (u.shape[0] > 0 and u.shape[1] != self.t):
            raise DimensionMismatch(
                f"sample-count mismatch: y {y.shape}, u {u.shape}, t={self.t}"
            )
        if not (np.all(np.isfinite(y)) and np.all(np.isfinite(u))):
            raise ValueError("time series contains non-finite entries")
        for name, arr in (("y", y), ("u", u)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return self.y.shape[0]

    @property
    def m(self) -> int:
        return self.u.shape[0]

    def to_csv(self, path) -> None:
        """Write as CSV with header ``t,y1..yp,u1..um``, one row per index."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["t"]
                + [f"y{i + 1}" for i in range(self.p)]
                + [f"u{i + 1}" for i in range(self.m)]
            )
            for idx in range(self.t):
                row = [str(idx + 1)]
                row += [repr(float(v)) for v in self.y[:, idx]]
                row += [repr(float(v)) for v in self.u[:, idx]]
                writer.writerow(row)

    @classmethod
    def from_csv(cls, path) -> "TimeSeriesData":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            p = sum(1 for h in header if h.startswith("y"))
            m = sum(1 for h in header if h.startswith("u"))
            rows = [list(map(float, r[1:])) for r in reader]
        data = np.asarray(rows, dtype=float).T
        t = data.shape[1] if data.size else 0
        return cls(y=data[:p], u=data[p : p + m].reshape(m, t), t=t)


@dataclass(frozen=True)
class Topology:
    """Boolean regulation structure: ``a_edges[i, j]`` means j drives i."""

    a_edges: np.ndarray
    b_edges: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a_edges, dtype=bool)
        b = np.asarray(self.b_edges, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch("a_edges must be square")
        if b.ndim != 2 or b.shape[0] != a.shape[0]:
            raise DimensionMismatch("b_edges row count must match a_edges")
        for name, arr in (("a_edges", a), ("b_edges", b)):
            arr = arr.copy()
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    @property
    def p(self) -> int:
        return self.a_edges.shape[0]

    @property
    def m(self) -> int:
        return self.b_edges.shape[1]

    def offdiag_link_count(self) -> int:
        return int(self.a_edges.sum() - np.diag(self.a_edges).sum())

    @classmethod
    def from_network(cls, net: ArxNetwork, tol: float = 0.0) -> "Topology":
        a = np.abs(net.a_coeffs).max(axis=2) > tol
        if net.m > 0:
            b = np.abs(net.b_coeffs).max(axis=2) > tol
        else:
            b = np.zeros((net.p, 0), dtype=bool)
        return cls(a_edges=a, b_edges=b)


def gen_stable_poly(
    order: int,
    rng: np.random.Generator,
    root_cap: float = ROOT_CAP,
    root_floor_frac: float = 0.4,
) -> np.ndarray:
    """Draw a monic real polynomial with all roots inside the disk of
    radius ``root_cap`` and return its non-leading coefficients.

    Roots are sampled directly (conjugate-paired for complex ones) with
    modulus between ``root_floor_frac * root_cap`` and ``root_cap``, so
    stability of the factor holds by construction and coefficients do not
    degenerate towards zero.
    """
    if order < 1:
        raise ValueError("order must be >= 1")
    lo = root_floor_frac**2
    roots: list[complex] = []
    remaining = order
    while remaining > 0:
        radius = root_cap * np.sqrt(rng.uniform(lo, 1.0))
        if remaining == 1 or rng.random() < 0.25:
            roots.append(radius if rng.random() < 0.5 else -radius)
            remaining -= 1
        else:
            # favour conjugate pairs with well-spread phases: clustered
            # real roots make the lagged regressors nearly collinear
            theta = rng.uniform(0.15 * np.pi, 0.85 * np.pi)
            z = radius * np.exp(1j * theta)
            roots.extend([z, z.conjugate()])
            remaining -= 2
    return np.real(np.poly(roots))[1:]


def companion_matrix(net: ArxNetwork) -> np.ndarray:
    """Block-companion matrix of ``A(z)``; its eigenvalues are the poles."""
    p, na = net.p, net.order_a
    comp = np.zeros((p * na, p * na))
    for lag in range(na):
        comp[:p, lag * p : (lag + 1) * p] = -net.a_coeffs[:, :, lag]
    if na > 1:
        comp[p:, : p * (na - 1)] = np.eye(p * (na - 1))
    return comp


def spectral_radius(net: ArxNetwork) -> float:
    """Largest pole modulus of ``A^-1(z)``."""
    return float(np.max(np.abs(np.linalg.eigvals(companion_matrix(net)))))


def is_stable(net: ArxNetwork) -> bool:
    """True iff every pole of ``A^-1(z)`` lies strictly inside the unit circle."""
    return spectral_radius(net) < 1.0


def _has_directed_cycle(adj: np.ndarray) -> bool:
    """Cycle detection on the off-diagonal adjacency via iterative DFS."""
    n = adj.shape[0]
    color = np.zeros(n, dtype=int)  # 0 white, 1 grey, 2 black
    for start in range(n):
        if color[start] != 0:
            continue
        stack = [(start, 0)]
        color[start] = 1
        while stack:
            node, nxt = stack[-1]
            found = False
            for j in range(nxt, n):
                stack[-1] = (node, j + 1)
                if j == node or not adj[node, j]:
                    continue
                if color[j] == 1:
                    return True
                if color[j] == 0:
                    color[j] = 1
                    stack.append((j, 0))
                    found = True
                    break
            if not found:
                color[node] = 2
                stack.pop()
    return False


def _draw_order(order_range: tuple[int, int], rng: np.random.Generator) -> int:
    lo, hi = order_range
    return int(rng.integers(lo, hi + 1))


def _draw_gain(gain_range: tuple[float, float], rng: np.random.Generator) -> float:
    sign = 1.0 if rng.random() < 0.5 else -1.0
    return sign * rng.uniform(*gain_range)


def gen_random_network(
    p: int,
    m: int,
    edge_prob: float,
    order_range: tuple[int, int],
    rng: np.random.Generator,
    *,
    max_attempts: int = MAX_GENERATION_ATTEMPTS,
    root_cap: float = GEN_POLY_ROOT_CAP,
    stability_margin: float = GEN_STABILITY_MARGIN,
    gain_range: tuple[float, float] = GEN_GAIN_RANGE,
) -> ArxNetwork:
    """Generate a stable sparse random ARX network.

    Self-loop polynomials are always present, each off-diagonal entry of
    ``A`` appears with probability ``edge_prob`` (a stable-root polynomial
    scaled by a random sign and a gain drawn from ``gain_range``), and
    ``B`` is diagonal with standard-normal coefficients.  Candidates are
    redrawn until the closed loop keeps all poles inside
    ``stability_margin`` (bounding signal amplification) and the
    off-diagonal graph contains a directed cycle.
    """
    if not 0.0 < edge_prob < 1.0:
        raise ValueError("edge_prob must lie strictly between 0 and 1")
    lo, hi = order_range
    if lo < 1 or hi < lo:
        raise ValueError("order_range must satisfy 1 <= lo <= hi")
    for _ in range(max_attempts):
        a = np.zeros((p, p, hi))
        for i in range(p):
            order = _draw_order(order_range, rng)
            a[i, i, :order] = gen_stable_poly(order, rng, root_cap)
        mask = rng.random((p, p)) < edge_prob
        np.fill_diagonal(mask, False)
        for i, j in zip(*np.nonzero(mask)):
            order = _draw_order(order_range, rng)
            gain = _draw_gain(gain_range, rng)
            a[i, j, :order] = gain * gen_stable_poly(order, rng, root_cap)
        b = np.zeros((p, m, hi if m > 0 else 1))
        for i in range(min(p, m)):
            order = _draw_order(order_range, rng)
            b[i, i, :order] = rng.standard_normal(order)
        net = ArxNetwork(p, m, a, b, np.zeros(p))
        if _has_directed_cycle(mask) and spectral_radius(net) < stability_margin:
            return net
    raise GenerationBudgetExceeded(
        f"no stable network with a feedback loop in {max_attempts} attempts"
    )


def gen_ring_network(
    p: int,
    order_range: tuple[int, int],
    rng: np.random.Generator,
    *,
    max_attempts: int = MAX_GENERATION_ATTEMPTS,
    root_cap: float = GEN_POLY_ROOT_CAP,
    stability_margin: float = GEN_STABILITY_MARGIN,
    gain_range: tuple[float, float] = GEN_RING_GAIN_RANGE,
) -> ArxNetwork:
    """Generate a stable ring network 1 -> 2 -> ... -> p -> 1.

    Every node keeps a self-loop polynomial; a single input drives node 1.
    Ring coupling gains default to a stronger range than the dense random
    generator: the loop gain is a product of all hops, so stability is not
    at risk, while the single input's excitation must survive the whole
    cycle to keep downstream links identifiable.
    """
    if p < 2:
        raise ValueError("ring needs p >= 2")
    lo, hi = order_range
    if lo < 1 or hi < lo:
        raise ValueError("order_range must satisfy 1 <= lo <= hi")
    for _ in range(max_attempts):
        a = np.zeros((p, p, hi))
        for i in range(p):
            order = _draw_order(order_range, rng)
            a[i, i, :order] = gen_stable_poly(order, rng, root_cap)
            src = (i - 1) % p  # node src drives node i along the ring
            order = _draw_order(order_range, rng)
            gain = _draw_gain(gain_range, rng)
            coeffs = gen_stable_poly(order, rng, root_cap)
            # unit-normalised coupling polynomial: the drawn gain then sets
            # the hop strength directly, so excitation survives the cycle
            a[i, src, :order] = gain * coeffs / max(float(np.linalg.norm(coeffs)), 1e-12)
        b = np.zeros((p, 1, hi))
        order = _draw_order(order_range, rng)
        b[0, 0, :order] = rng.standard_normal(order)
        net = ArxNetwork(p, 1, a, b, np.zeros(p))
        if spectral_radius(net) < stability_margin:
            return net
    raise GenerationBudgetExceeded(f"no stable ring network in {max_attempts} attempts")


def simulate(
    net: ArxNetwork,
    u: np.ndarray | None,
    t: int,
    rng: np.random.Generator | None = None,
) -> TimeSeriesData:
    """Simulate ``t`` samples of the network from zero initial conditions.

    ``Y(t) = -sum_i A_i Y(t-i) + sum_i B_i U(t-i) + E(t)`` with ``E`` drawn
    i.i.d. Gaussian at the per-node variance.  Pre-sample values of ``Y``
    and ``U`` are zero.
    """
    if u is None:
        u = np.zeros((net.m, t))
    u = np.asarray(u, dtype=float)
    if u.ndim != 2 or u.shape[0] != net.m or u.shape[1] < t:
        raise DimensionMismatch(f"u: expected ({net.m}, >= {t}), got {u.shape}")
    if not is_stable(net):
        warnings.warn("simulating an unstable network", stacklevel=2)
    if np.any(net.noise_var > 0):
        if rng is None:
            raise ValueError("rng required when noise_var > 0")
        e = rng.standard_normal((net.p, t)) * np.sqrt(net.noise_var)[:, None]
    else:
        e = np.zeros((net.p, t))
    a_lags = np.moveaxis(net.a_coeffs, 2, 0)
    b_lags = np.moveaxis(net.b_coeffs, 2, 0) if net.m > 0 else None
    y = np.zeros((net.p, t))
    for idx in range(t):
        acc = e[:, idx].copy()
        for lag in range(1, net.order_a + 1):
            if idx - lag < 0:
                break
            acc -= a_lags[lag - 1] @ y[:, idx - lag]
        if b_lags is not None:
            for lag in range(1, net.order_b + 1):
                if idx - lag < 0:
                    break
                acc += b_lags[lag - 1] @ u[:, idx - lag]
        y[:, idx] = acc
    return TimeSeriesData(y=y, u=u[:, :t], t=t)


def noise_var_for_snr(u_var: float, snr_db: float) -> float:
    """Noise variance giving the requested SNR = 10 log10(u_var / e_var)."""
    if u_var <= 0:
        raise ValueError("u_var must be positive")
    return u_var * 10.0 ** (-snr_db / 10.0)


def simulate_repressilator(
    t: int,
    noise_var: float = 0.0,
    u_amplitude: float = 0.01,
    rng: np.random.Generator | None = None,
    step_onset: int | None = None,
) -> TimeSeriesData:
    """Simulate the six-state discrete repressilator from a zero state.

    The three mRNA states decay and are repressed by the opposite protein
    through a Hill term; proteins decay and are produced linearly from
    their mRNA.  A step stimulus of ``u_amplitude`` enters state 1 from
    ``step_onset`` (defaults to mid-series; a step that is already on in
    the first sample would be a constant regressor, indistinguishable from
    the constant hiding in every activation/repression pair).
    """
    if t < 2:
        raise ValueError("need t >= 2")
    delta = np.array(REPRESSILATOR_DELTA)
    alpha = REPRESSILATOR_ALPHA
    beta = REPRESSILATOR_BETA
    hill_n = REPRESSILATOR_HILL_N
    src = REPRESSILATOR_SOURCE
    if step_onset is None:
        step_onset = max(t // 2, 1)
    u = np.where(np.arange(1, t + 1) >= step_onset, float(u_amplitude), 0.0)
    if noise_var > 0:
        if rng is None:
            raise ValueError("rng required when noise_var > 0")
        e = rng.standard_normal((6, t)) * np.sqrt(noise_var)
    else:
        e = np.zeros((6, t))
    x = np.zeros((6, t))
    for idx in range(1, t):
        prev = x[:, idx - 1]
        nxt = (1.0 - delta) * prev
        for i in range(3):
            nxt[i] += alpha[i] / (1.0 + prev[src[i]] ** hill_n[i])
            nxt[3 + i] += beta[i] * prev[src[3 + i]]
        nxt[0] += u[idx - 1]
        x[:, idx] = nxt + e[:, idx]
    return TimeSeriesData(y=x, u=u[None, :], t=t)


def repressilator_truth_topology() -> Topology:
    """Regulation graph of the repressilator including self-loops."""
    a = np.zeros((6, 6), dtype=bool)
    np.fill_diagonal(a, True)
    for i, s in enumerate(REPRESSILATOR_SOURCE):
        a[i, s] = True
    b = np.zeros((6, 1), dtype=bool)
    b[0, 0] = True
    return Topology(a_edges=a, b_edges=b)
