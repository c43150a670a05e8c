"""Posterior moments, the type-II objective and its concave-side gradients.

With prior variances collected in the diagonal matrix ``P`` (see
``Hyperparameters.prior_var``) the posterior over the weights of one node is
Gaussian with

    Sigma = [P^-1 + lam^-1 Phi' Phi]^-1,
    mu    = Sigma (lam^-1 Phi' y + B^-1 eps),

computed through the Woodbury identity ``Sigma = P - P Phi' S^-1 Phi P``
with ``S = lam I + Phi P Phi'`` whenever the weight dimension exceeds the
sample count.  The same ``S`` factorisation yields the marginal likelihood,
the type-II cost and the linearisation weights used by the outer
convex-concave iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import SingularSystem
from .priors import Hyperparameters, PriorMode
from .regression import RegressionProblem


@dataclass(frozen=True)
class PosteriorMoments:
    """Posterior mean and covariance (rows/columns of pinned weights are 0)."""

    mu: np.ndarray
    sigma: np.ndarray

    @property
    def sigma_diag(self) -> np.ndarray:
        return np.diag(self.sigma)


@dataclass(frozen=True)
class CccpWeights:
    """Negated gradients of the concave part at the current hyperparameters."""

    g_beta: np.ndarray
    g_gamma: np.ndarray
    g_lambda: float

    def __post_init__(self):
        if not (
            np.all(np.isfinite(self.g_beta))
            and np.all(np.isfinite(self.g_gamma))
            and np.isfinite(self.g_lambda)
        ):
            raise ValueError("weights must be finite")
        if np.any(self.g_beta < 0) or np.any(self.g_gamma < 0) or self.g_lambda < 0:
            raise ValueError("weights must be nonnegative")


def _factor_s(phi: np.ndarray, p_var: np.ndarray, lam: float):
    """Cholesky factor of ``S = lam I + Phi diag(p_var) Phi'``.

    Retries with an escalating jitter: at extreme noise floors the rank
    deficiency of the prior term meets float round-off.
    """
    n = phi.shape[0]
    s = lam * np.eye(n) + (phi * p_var) @ phi.T
    jitter = 1e-14 * max(float(np.trace(s)) / n, 1.0)
    for attempt in range(4):
        try:
            return cho_factor(s, lower=True, check_finite=False)
        except np.linalg.LinAlgError as exc:
            if attempt == 3:
                raise SingularSystem(f"inner system factorisation failed: {exc}") from exc
            s = s + jitter * np.eye(n)
            jitter *= 100.0


def _logdet_from_factor(factor) -> float:
    return 2.0 * float(np.sum(np.log(np.diag(factor[0]))))


def _prior_mean_ratio(prob: RegressionProblem, hyper: Hyperparameters) -> np.ndarray:
    """Elementwise ``P B^-1`` (safe at beta = 0), used with the prior mean."""
    if hyper.mode is PriorMode.ELEMENT:
        return np.ones(prob.dim)
    if hyper.mode is PriorMode.GROUP:
        return np.zeros(prob.dim)
    ge = hyper.gamma_elementwise(prob.groups)
    tot = hyper.beta + ge
    ratio = np.where(tot > 0, ge / np.where(tot > 0, tot, 1.0), 0.0)
    return np.where(hyper.active_groups[prob.groups.group_of], ratio, 0.0)


def posterior_moments(
    prob: RegressionProblem,
    hyper: Hyperparameters,
    method: str = "auto",
) -> PosteriorMoments:
    """Gaussian posterior moments for one node.

    ``method`` selects the computation path: ``"woodbury"`` solves an
    n x n system, ``"direct"`` inverts on the active coordinates, and
    ``"auto"`` picks Woodbury when the dictionary is wider than tall.
    """
    phi, y = prob.phi, prob.y
    n, dim = phi.shape
    p_var = hyper.prior_var(prob.groups)
    lam = hyper.lam
    if method == "auto":
        method = "woodbury" if dim > n else "direct"
    if method == "woodbury":
        factor = _factor_s(phi, p_var, lam)
        g0 = p_var * (phi.T @ y) / lam + _prior_mean_ratio(prob, hyper) * prob.epsilon
        mu = g0 - p_var * (phi.T @ cho_solve(factor, phi @ g0, check_finite=False))
        phi_p = phi * p_var
        sigma = np.diag(p_var) - phi_p.T @ cho_solve(factor, phi_p, check_finite=False)
        return PosteriorMoments(mu=mu, sigma=sigma)
    if method != "direct":
        raise ValueError(f"unknown method {method!r}")
    active = p_var > 0
    phi_a = phi[:, active]
    sig_inv = np.diag(1.0 / p_var[active]) + (phi_a.T @ phi_a) / lam
    try:
        chol = cho_factor(sig_inv, lower=True, check_finite=False)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"direct posterior factorisation failed: {exc}") from exc
    rhs = phi_a.T @ y / lam
    if np.any(prob.epsilon != 0.0) and hyper.mode is not PriorMode.GROUP:
        rhs = rhs + prob.epsilon[active] / hyper.beta[active]
    mu = np.zeros(dim)
    mu[active] = cho_solve(chol, rhs, check_finite=False)
    sigma = np.zeros((dim, dim))
    sigma_a = cho_solve(chol, np.eye(int(active.sum())), check_finite=False)
    sigma[np.ix_(active, active)] = sigma_a
    return PosteriorMoments(mu=mu, sigma=sigma)


def dc_smooth_part(
    prob: RegressionProblem,
    w: np.ndarray,
    beta: np.ndarray,
    gamma: np.ndarray,
    lam: float,
    mode: PriorMode = PriorMode.COMBINED,
) -> float:
    """Jointly convex part of the type-II objective at raw (positive) values."""
    resid = prob.y - prob.phi @ w
    total = float(resid @ resid) / lam
    if mode is not PriorMode.ELEMENT:
        ge = prob.groups.expand(gamma)
        total += float(np.sum(w * w / ge))
    if mode is not PriorMode.GROUP:
        dev = w - prob.epsilon
        total += float(np.sum(dev * dev / beta))
    return total


def dc_concave_part(
    prob: RegressionProblem,
    beta: np.ndarray,
    gamma: np.ndarray,
    lam: float,
    mode: PriorMode = PriorMode.COMBINED,
) -> float:
    """Concave-side function (negated log-determinants) at raw values."""
    ge = prob.groups.expand(gamma)
    if mode is PriorMode.ELEMENT:
        p_var = np.asarray(beta, dtype=float)
        prior_logdet = 0.0
    elif mode is PriorMode.GROUP:
        p_var = ge
        prior_logdet = 0.0
    else:
        p_var = beta * ge / (beta + ge)
        prior_logdet = float(np.sum(np.log(beta + ge)))
    factor = _factor_s(prob.phi, p_var, lam)
    return -prior_logdet - _logdet_from_factor(factor)


def type2_cost(prob: RegressionProblem, hyper: Hyperparameters, w: np.ndarray) -> float:
    """Type-II objective at ``(w, hyper)``.

    Coordinates with zero prior variance act as a point prior: the value is
    infinite unless the weight sits exactly at the pinned location.
    Variances of flagged groups enter the log-determinant bookkeeping at
    their parked floor values, so pruned groups contribute a constant.
    """
    w = np.asarray(w, dtype=float)
    resid = prob.y - prob.phi @ w
    cost = float(resid @ resid) / hyper.lam
    groups = prob.groups
    gmask = hyper.active_groups[groups.group_of]
    ge = hyper.gamma_elementwise(groups)
    mode = hyper.mode
    if np.any(np.abs(w[~gmask]) > 0):
        return np.inf
    if mode is not PriorMode.ELEMENT:
        ok = gmask & (ge > 0)
        cost += float(np.sum(w[ok] ** 2 / ge[ok]))
        if np.any(np.abs(w[gmask & ~(ge > 0)]) > 0):
            return np.inf
    if mode is not PriorMode.GROUP:
        dev = w - prob.epsilon
        ok = gmask & (hyper.beta > 0)
        cost += float(np.sum(dev[ok] ** 2 / hyper.beta[ok]))
        if np.any(np.abs(dev[gmask & ~(hyper.beta > 0)]) > 0):
            return np.inf
    if mode is PriorMode.COMBINED:
        cost += float(np.sum(np.log(hyper.beta + ge)))
    factor = _factor_s(prob.phi, hyper.prior_var(groups), hyper.lam)
    return cost + _logdet_from_factor(factor)


def marginal_nll(prob: RegressionProblem, hyper: Hyperparameters) -> float:
    """Negative doubled log marginal likelihood, up to an additive constant.

    Equals ``min_w type2_cost`` exactly; evaluated in closed form from the
    n x n factorisation.
    """
    p_var = hyper.prior_var(prob.groups)
    factor = _factor_s(prob.phi, p_var, hyper.lam)
    mean = _prior_mean_ratio(prob, hyper) * prob.epsilon
    resid = prob.y - prob.phi @ mean
    quad = float(resid @ cho_solve(factor, resid, check_finite=False))
    total = quad + _logdet_from_factor(factor)
    if hyper.mode is PriorMode.COMBINED:
        ge = hyper.gamma_elementwise(prob.groups)
        tot = hyper.beta + ge
        total += float(np.sum(np.log(tot)))
        if np.any(prob.epsilon != 0.0):
            total += float(np.sum(prob.epsilon**2 / tot))
    return total


def cccp_weights(prob: RegressionProblem, hyper: Hyperparameters) -> CccpWeights:
    """Linearisation weights: negated gradients of the concave part.

    ``g_lambda = trace(S^-1)`` and the beta/gamma entries combine the
    prior log-determinant slope with the data-dependent diagonal of
    ``Phi' S^-1 Phi``, each evaluated at the current hyperparameters.
    """
    phi = prob.phi
    n = phi.shape[0]
    p_var = hyper.prior_var(prob.groups)
    factor = _factor_s(phi, p_var, hyper.lam)
    s_inv = cho_solve(factor, np.eye(n), check_finite=False)
    g_lambda = float(np.trace(s_inv))
    d = np.einsum("nq,nq->q", phi, s_inv @ phi)
    d = np.maximum(d, 0.0)  # PSD diagonal; clip tiny negatives from roundoff
    groups = prob.groups
    mode = hyper.mode
    if mode is PriorMode.ELEMENT:
        g_beta = d
        g_gamma = np.zeros(groups.n_groups)
    elif mode is PriorMode.GROUP:
        g_beta = np.zeros(prob.dim)
        g_gamma = np.array([float(np.sum(d[sl])) for sl in groups.slices()])
    else:
        ge = hyper.gamma_elementwise(groups)
        denom = hyper.beta + ge
        base = 1.0 / denom
        g_beta = base + (ge**2) * d / denom**2
        per_elem = base + (hyper.beta**2) * d / denom**2
        g_gamma = np.array([float(np.sum(per_elem[sl])) for sl in groups.slices()])
    return CccpWeights(g_beta=g_beta, g_gamma=g_gamma, g_lambda=g_lambda)
