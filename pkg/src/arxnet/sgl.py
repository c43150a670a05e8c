"""Reweighted sparse-group solver for the inner convex problem.

Each outer linearisation step requires

    min_w  sqrt(g_lam) ||y - Phi w||_2
         + sum_r ( sqrt(g_gam_r) ||w_r||_2 + sum_j sqrt(g_beta_rj) |w_rj - eps_rj| )

which couples the groups only through the residual.  The problem is split
as a sharing problem (one consensus copy of each group's fitted values) and
solved with scaled ADMM: parallel per-group subproblems, an averaged fit,
a closed-form shrinkage for the residual block and a dual ascent step.
The per-group subproblems are small sparse-group-lasso fits handled by
accelerated proximal gradient, batched over groups via zero-padding to a
common width.

The objective is invariant to a positive rescaling, so ``solve`` normalises
the weights to a unit data term before iterating; this keeps a fixed
penalty parameter ``rho`` well conditioned across reweighting steps.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from .posterior import CccpWeights
from .regression import RegressionProblem


def soft_threshold(x: np.ndarray, thr: np.ndarray | float) -> np.ndarray:
    return np.sign(x) * np.maximum(np.abs(x) - thr, 0.0)


def group_shrink_rows(x: np.ndarray, thr: np.ndarray) -> np.ndarray:
    """Row-wise l2 shrinkage: scale each row towards zero by its threshold."""
    norms = np.linalg.norm(x, axis=-1, keepdims=True)
    scale = np.where(norms > 0, np.maximum(1.0 - thr[..., None] / np.where(norms > 0, norms, 1.0), 0.0), 0.0)
    return x * scale


def sgl_prox(
    x: np.ndarray,
    elem_thr: np.ndarray,
    group_thr: np.ndarray,
    eps: np.ndarray,
) -> np.ndarray:
    """Proximal map of the blended penalty, rows = groups.

    Elementwise soft-thresholding centred at ``eps`` followed by group
    shrinkage; exact for ``eps = 0``, used as a stage-wise approximation
    otherwise.
    """
    shifted = eps + soft_threshold(x - eps, elem_thr)
    return group_shrink_rows(shifted, group_thr)


@dataclass(frozen=True)
class AdmmState:
    """One sharing-ADMM iterate: padded group weights, fits, consensus, dual."""

    w_groups: np.ndarray  # (G, kmax), zero outside each group's true width
    phiw: np.ndarray      # (G, n) per-group fitted values
    zbar: np.ndarray      # (n,) consensus average
    u: np.ndarray         # (n,) scaled dual
    rounds: int = 0
    primal_resid: float = np.inf
    dual_resid: float = np.inf


class InnerSolver:
    """Sharing-ADMM solver bound to one regression problem.

    Group blocks are padded to a common width so every per-round update is
    a fixed sequence of batched array operations; reductions are fixed
    order, making results independent of any parallel schedule.
    """

    def __init__(
        self,
        prob: RegressionProblem,
        rho: float = 1.0,
        max_rounds: int = 4000,
        tol: float = 1e-6,
        fista_iters: int = 25,
        rescale: bool = True,
        adapt_rho: bool = True,
        relax: float = 1.6,
    ):
        if rho <= 0:
            raise ValueError("rho must be positive")
        self.prob = prob
        self.rho = float(rho)
        self.max_rounds = int(max_rounds)
        self.tol = float(tol)
        self.fista_iters = int(fista_iters)
        self.adapt_rho = bool(adapt_rho)
        self.relax = float(relax)
        groups = prob.groups
        self.n_groups = groups.n_groups
        self.kmax = int(max(groups.group_sizes))
        self.n = prob.n_rows
        # Exact nondimensionalisation: y and each block of Phi are brought
        # to unit per-sample scale; weights and the solution map back by
        # the same factors, so the minimiser is unchanged.
        if rescale:
            self.s0 = max(float(np.linalg.norm(prob.y)) / np.sqrt(self.n), 1e-12)
            s_grp = []
            for sl, size in zip(groups.slices(), groups.group_sizes):
                norm = float(np.linalg.norm(prob.phi[:, sl]))
                s_grp.append(max(norm / np.sqrt(self.n * size), 1e-12 * self.s0))
            self.s_group = np.asarray(s_grp)
        else:
            self.s0 = 1.0
            self.s_group = np.ones(self.n_groups)
        self.y_int = prob.y / self.s0
        self.mask = np.zeros((self.n_groups, self.kmax), dtype=bool)
        self.phi3 = np.zeros((self.n_groups, self.n, self.kmax))
        self.eps2 = np.zeros((self.n_groups, self.kmax))
        for r, sl in enumerate(groups.slices()):
            size = groups.group_sizes[r]
            self.mask[r, :size] = True
            self.phi3[r, :, :size] = prob.phi[:, sl] / self.s_group[r]
            self.eps2[r, :size] = prob.epsilon[sl] * self.s_group[r] / self.s0
        self.gram = np.einsum("gni,gnj->gij", self.phi3, self.phi3)
        lip = np.linalg.eigvalsh(self.gram)[:, -1]
        self.lip = np.maximum(lip, 1e-12 * max(float(lip.max()), 1.0))
        # spectral norm of the full (rescaled) dictionary, for the
        # whole-problem proximal-gradient route
        flat = self.phi3.transpose(1, 0, 2).reshape(self.n, -1)
        self.full_lip = max(float(np.linalg.norm(flat[:, self.mask.ravel()], 2)) ** 2, 1e-12)
        self.converged = True
        self.last_rounds = 0
        self.last_rho = self.rho
        self._sqrt_state: tuple[np.ndarray, float] | None = None

    # -- packing helpers -------------------------------------------------
    def pack(self, w: np.ndarray) -> np.ndarray:
        """Flat weights (original coordinates) to the padded internal layout."""
        out = np.zeros((self.n_groups, self.kmax))
        out[self.mask] = np.asarray(w, dtype=float)
        return out * (self.s_group / self.s0)[:, None]

    def unpack(self, w2: np.ndarray) -> np.ndarray:
        return (w2 * (self.s0 / self.s_group)[:, None])[self.mask]

    def pack_weights(self, weights: CccpWeights) -> tuple[np.ndarray, np.ndarray]:
        """Padded sqrt penalty weights mapped to internal coordinates."""
        b = np.zeros((self.n_groups, self.kmax))
        b[self.mask] = np.sqrt(weights.g_beta)
        b /= self.s_group[:, None]
        a = np.sqrt(weights.g_gamma) / self.s_group
        return b, a

    def initial_state(self, w_init: np.ndarray | None = None) -> AdmmState:
        w2 = self.pack(w_init) if w_init is not None else np.zeros((self.n_groups, self.kmax))
        phiw = np.einsum("gnk,gk->gn", self.phi3, w2)
        return AdmmState(
            w_groups=w2,
            phiw=phiw,
            zbar=phiw.mean(axis=0),
            u=np.zeros(self.n),
        )

    def objective(self, weights: CccpWeights, w: np.ndarray) -> float:
        """Value of the reweighted objective at a flat weight vector."""
        resid = self.prob.y - self.prob.phi @ np.asarray(w, dtype=float)
        total = np.sqrt(weights.g_lambda) * float(np.linalg.norm(resid))
        norms = self.prob.groups.group_norms(w)
        total += float(np.sqrt(weights.g_gamma) @ norms)
        total += float(np.sqrt(weights.g_beta) @ np.abs(w - self.prob.epsilon))
        return total

    # -- one ADMM round ---------------------------------------------------
    def step(
        self,
        state: AdmmState,
        weights: CccpWeights,
        rho: float,
        fista_iters: int | None = None,
    ) -> AdmmState:
        """Run one scaled-ADMM round at the literal weights and rho."""
        b, a = self.pack_weights(weights)
        sqrt_gl = np.sqrt(weights.g_lambda)
        return self._step_packed(state, b, a, sqrt_gl, rho, fista_iters or self.fista_iters)

    def _step_packed(
        self,
        state: AdmmState,
        b: np.ndarray,
        a: np.ndarray,
        sqrt_gl: float,
        rho: float,
        fista_iters: int,
        relax: float = 1.0,
    ) -> AdmmState:
        g = self.n_groups
        mean_old = state.phiw.mean(axis=0)
        v = state.phiw - mean_old + state.zbar - state.u
        w2 = self._solve_group_subproblems(state.w_groups, v, b, a, rho, fista_iters)
        phiw = np.einsum("gnk,gk->gn", self.phi3, w2)
        mean = phiw.mean(axis=0)
        mean_rel = relax * mean + (1.0 - relax) * state.zbar if relax != 1.0 else mean
        c = state.u + mean_rel - self.y_int / g
        norm_c = float(np.linalg.norm(c))
        kappa = sqrt_gl / rho
        zhat = np.zeros_like(c) if norm_c <= kappa else (1.0 - kappa / norm_c) * c
        zbar = zhat + self.y_int / g
        u = state.u + mean_rel - zbar
        primal = float(np.linalg.norm(mean - zbar)) * np.sqrt(g)
        # dual residual of the group constraints: rho Phi_r' (z_r^+ - z_r)
        # with z_r = Phi_r w_r + (zbar - mean)
        dz = (phiw - state.phiw) + (zbar - state.zbar) - (mean - mean_old)
        dual = rho * float(np.linalg.norm(np.einsum("gnk,gn->gk", self.phi3, dz)))
        return AdmmState(
            w_groups=w2,
            phiw=phiw,
            zbar=zbar,
            u=u,
            rounds=state.rounds + 1,
            primal_resid=primal,
            dual_resid=dual,
        )

    def _solve_group_subproblems(
        self,
        w2: np.ndarray,
        v: np.ndarray,
        b: np.ndarray,
        a: np.ndarray,
        rho: float,
        fista_iters: int,
    ) -> np.ndarray:
        """Batched FISTA for min pen(w_r) + (rho/2)||Phi_r w_r - v_r||^2."""
        phitv = np.einsum("gnk,gn->gk", self.phi3, v)
        eta = (1.0 / (rho * self.lip))[:, None]
        elem_thr = eta * b
        group_thr = (eta[:, 0]) * a
        x = w2.copy()
        yk = x
        tk = 1.0
        for _ in range(fista_iters):
            grad = rho * (np.einsum("gij,gj->gi", self.gram, yk) - phitv)
            xn = sgl_prox(yk - eta * grad, elem_thr, group_thr, self.eps2)
            xn[~self.mask] = 0.0
            # gradient-scheme restart keeps the momentum sequence monotone
            if float(np.sum((yk - xn) * (xn - x))) > 0.0:
                tk = 1.0
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            yk = xn + ((tk - 1.0) / tn) * (xn - x)
            delta = float(np.max(np.abs(xn - x)))
            x = xn
            tk = tn
            if delta <= 1e-12 * (1.0 + float(np.max(np.abs(x)))):
                break
        return x

    # -- full solve --------------------------------------------------------
    def solve(
        self,
        weights: CccpWeights,
        w_init: np.ndarray | None = None,
        state: AdmmState | None = None,
        max_rounds: int | None = None,
        tol: float | None = None,
    ) -> tuple[np.ndarray, AdmmState]:
        """Iterate to tolerance; returns the flat weights and final state.

        Weights are normalised to a unit data term (the minimiser is
        unchanged) so the fixed ``rho`` stays well scaled.
        """
        tol = self.tol if tol is None else tol
        max_rounds = self.max_rounds if max_rounds is None else max_rounds
        if state is None:
            state = self.initial_state(w_init)
        sqrt_gl = np.sqrt(weights.g_lambda)
        if sqrt_gl <= 0:
            raise ValueError("g_lambda must be positive")
        bw, aw = self.pack_weights(weights)
        b = bw / sqrt_gl
        a = aw / sqrt_gl
        abstol = 1e-10 * np.sqrt(self.n * self.n_groups)
        sqrt_g = np.sqrt(self.n_groups)
        rho = self.last_rho if state.rounds > 0 else self.rho
        self.converged = False
        for _ in range(max_rounds):
            state = self._step_packed(state, b, a, 1.0, rho, self.fista_iters, relax=self.relax)
            eps_pri = abstol + tol * max(
                float(np.linalg.norm(state.phiw)), sqrt_g * float(np.linalg.norm(state.zbar)), 1e-12
            )
            dual_ref = rho * float(np.linalg.norm(np.einsum("gnk,n->gk", self.phi3, state.u)))
            eps_dual = abstol + tol * max(dual_ref, 1e-12)
            if state.primal_resid <= eps_pri and state.dual_resid <= eps_dual:
                self.converged = True
                break
            if self.adapt_rho and state.rounds % 5 == 0:
                # residual balancing keeps the two convergence measures
                # within an order of magnitude of each other
                if state.primal_resid > 10.0 * max(state.dual_resid, 1e-300) and rho < 1e8 * self.rho:
                    rho *= 2.0
                    state = replace(state, u=state.u / 2.0)
                elif state.dual_resid > 10.0 * max(state.primal_resid, 1e-300) and rho > 1e-8 * self.rho:
                    rho /= 2.0
                    state = replace(state, u=state.u * 2.0)
        self.last_rounds = state.rounds
        self.last_rho = rho
        if not self.converged:
            warnings.warn(
                f"inner solver hit the round cap ({max_rounds}); returning best iterate",
                stacklevel=2,
            )
        return self.unpack(state.w_groups), state

    # -- matched-scale proximal-gradient route ------------------------------
    def solve_matched(
        self,
        weights: CccpWeights,
        w_init: np.ndarray | None = None,
        warm: bool = True,
        max_cycles: int = 40,
        fista_cap: int = 400,
        tol: float | None = None,
        live_groups: np.ndarray | None = None,
    ) -> np.ndarray:
        """Solve the same objective through its squared-residual form.

        ``alpha ||y - Phi w|| + pen(w)`` shares its minimiser with
        ``(theta/2) ||y - Phi w||^2 + pen(w)`` at the matched scale
        ``theta = alpha / ||y - Phi w*||``, so the nonsmooth data term is
        handled by a scalar fixed point around a smooth sparse-group
        problem.  Each cycle runs accelerated proximal gradient at the
        current ``theta`` and then rematches it to the residual.

        ``live_groups`` restricts the iteration to groups that are still
        active: pinned groups stay at zero exactly, so skipping them is an
        exact shortcut, not an approximation.
        """
        tol = self.tol if tol is None else tol
        alpha = float(np.sqrt(weights.g_lambda))
        if alpha <= 0:
            raise ValueError("g_lambda must be positive")
        bw, aw = self.pack_weights(weights)
        b = bw / alpha
        a = aw / alpha
        if warm and self._sqrt_state is not None:
            w2, theta = self._sqrt_state
            w2 = w2.copy()
        else:
            w2 = self.pack(w_init) if w_init is not None else np.zeros((self.n_groups, self.kmax))
            theta = None
        if live_groups is None or bool(np.all(live_groups)):
            live = slice(None)
        else:
            live = np.nonzero(np.asarray(live_groups, dtype=bool))[0]
            w2[~np.asarray(live_groups, dtype=bool)] = 0.0
        phi3 = self.phi3[live]
        eps2 = self.eps2[live]
        mask = self.mask[live]
        b_l = b[live]
        a_l = a[live]
        w_l = w2[live]
        resid_floor = 1e-10 * np.sqrt(self.n)
        settled = False
        for _ in range(max_cycles):
            resid = np.einsum("gnk,gk->n", phi3, w_l) - self.y_int
            rnorm = max(float(np.linalg.norm(resid)), resid_floor)
            theta_new = 1.0 / rnorm
            if theta is not None and settled and abs(theta_new - theta) <= 1e-6 * theta:
                theta = theta_new
                break
            theta = theta_new
            w_l, settled = self._fista_live(w_l, theta, b_l, a_l, phi3, eps2, mask, fista_cap, tol)
        w2[live] = w_l
        self._sqrt_state = (w2.copy(), theta)
        return self.unpack(w2)

    # -- iteratively reweighted least squares route --------------------------
    def solve_irls(
        self,
        weights: CccpWeights,
        w_init: np.ndarray | None = None,
        max_iters: int = 120,
        tol: float | None = None,
        live_groups: np.ndarray | None = None,
        delta_init: float = 1e-2,
        delta_min: float = 1e-12,
    ) -> np.ndarray:
        """Solve the reweighted objective by direct quadratic majorisation.

        Every term gets the standard smooth upper bound
        ``|v| <= (v^2 / |v~| + |v~|) / 2`` around the current iterate, so
        each step is one SPD solve.  A decaying guard ``delta`` keeps the
        reweighting bounded; dimensions here are small enough that the
        dense solve is cheap and immune to the dictionary conditioning
        that throttles first-order methods near exact interpolation.
        """
        tol = self.tol if tol is None else tol
        alpha = float(np.sqrt(weights.g_lambda))
        if alpha <= 0:
            raise ValueError("g_lambda must be positive")
        if w_init is not None and np.any(np.asarray(w_init) != 0.0):
            # warm start: most of the annealing has already happened
            delta_init = min(delta_init, 1e-6)
        groups = self.prob.groups
        live_mask = (
            np.ones(self.n_groups, dtype=bool)
            if live_groups is None
            else np.asarray(live_groups, dtype=bool)
        )
        cols = live_mask[groups.group_of]
        phi = self.prob.phi[:, cols]
        y = self.prob.y
        eps = self.prob.epsilon[cols]
        b = np.sqrt(weights.g_beta)[cols] / alpha
        a_group = np.sqrt(weights.g_gamma) / alpha
        group_of = groups.group_of[cols]
        sizes = np.bincount(group_of, minlength=groups.n_groups).astype(float)
        w = (np.asarray(w_init, dtype=float)[cols] if w_init is not None else np.zeros(cols.sum()))
        gram = phi.T @ phi
        phity = phi.T @ y
        scale = max(float(np.linalg.norm(y)) / np.sqrt(self.n), 1e-12)
        delta = delta_init * scale
        resid_floor = 1e-12 * np.sqrt(self.n) * scale
        prev = w
        for _ in range(max_iters):
            resid = y - phi @ w
            rnorm = max(float(np.linalg.norm(resid)), resid_floor)
            theta = 1.0 / rnorm
            gnorms = np.sqrt(np.bincount(group_of, weights=w * w, minlength=groups.n_groups))
            d_elem = b / np.maximum(np.abs(w - eps), delta)
            d_group = (a_group / np.maximum(gnorms, delta))[group_of]
            lhs = theta * gram
            lhs[np.diag_indices_from(lhs)] += d_elem + d_group
            rhs = theta * phity + d_elem * eps
            try:
                w = np.linalg.solve(lhs, rhs)
            except np.linalg.LinAlgError:
                w = np.linalg.lstsq(lhs, rhs, rcond=None)[0]
            change = float(np.max(np.abs(w - prev)))
            prev = w
            if delta > delta_min * scale:
                delta = max(delta * 0.5, delta_min * scale)
            elif change <= tol * (1.0 + float(np.max(np.abs(w)))):
                break
        out = np.zeros(self.prob.dim)
        out[cols] = w
        # snap numerically dead coordinates to exact zero
        top = float(np.max(np.abs(out))) if out.size else 0.0
        if top > 0:
            out[np.abs(out) < 1e-10 * top] = 0.0
        return out

    def _fista_live(
        self,
        w_l: np.ndarray,
        theta: float,
        b: np.ndarray,
        a: np.ndarray,
        phi3: np.ndarray,
        eps2: np.ndarray,
        mask: np.ndarray,
        cap: int,
        tol: float,
    ) -> tuple[np.ndarray, bool]:
        """Accelerated proximal gradient on the squared-form objective."""
        eta = 1.0 / (theta * self.full_lip)
        elem_thr = eta * b
        group_thr = eta * a
        x = w_l
        yk = x
        tk = 1.0
        small = False
        for _ in range(cap):
            resid = np.einsum("gnk,gk->n", phi3, yk) - self.y_int
            grad = theta * np.einsum("gnk,n->gk", phi3, resid)
            xn = sgl_prox(yk - eta * grad, elem_thr, group_thr, eps2)
            xn[~mask] = 0.0
            if float(np.sum((yk - xn) * (xn - x))) > 0.0:
                tk = 1.0
            tn = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
            yk = xn + ((tk - 1.0) / tn) * (xn - x)
            delta = float(np.max(np.abs(xn - x)))
            x = xn
            tk = tn
            if delta <= max(1e-12, 0.01 * tol) * (1.0 + float(np.max(np.abs(x)))):
                small = True
                break
        return x, small


def solve_inner_sgl(
    prob: RegressionProblem,
    weights: CccpWeights,
    w_init: np.ndarray | None = None,
    rho: float = 1.0,
    max_rounds: int = 4000,
    tol: float = 1e-6,
    fista_iters: int = 40,
) -> np.ndarray:
    """One-shot solve of the reweighted sparse-group problem."""
    solver = InnerSolver(prob, rho=rho, max_rounds=max_rounds, tol=tol, fista_iters=fista_iters)
    w, _ = solver.solve(weights, w_init=w_init)
    return w


def admm_step(
    prob: RegressionProblem,
    state: AdmmState,
    weights: CccpWeights,
    rho: float,
    fista_iters: int = 40,
) -> AdmmState:
    """One sharing-ADMM round at the literal weights and coordinates."""
    solver = InnerSolver(prob, rho=rho, fista_iters=fista_iters, rescale=False, adapt_rho=False)
    return solver.step(state, weights, rho, fista_iters=fista_iters)
