"""Weighted-Lasso, 2-step weighted Lasso and support-restricted GLM fits.

The weighted Lasso is solved by cyclic coordinate descent on a quadratic
majorization of the average negative log-likelihood, built from the
family's curvature bound. For :class:`~gmcp_bandit.glm.LinearGaussian` the
majorization is exact; for the logistic family it is a majorize-minimize
(MM) scheme and each outer step is monotone in the true objective.

Coordinate descent runs on a working set (current support plus KKT
violators) using the Gram matrix of the working-set columns; the sweep
loop lives in :mod:`gmcp_bandit.kernels`.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Iterable

import numpy as np

from .glm import ETA_CLAMP, Dataset, GlmFamily
from .kernels import cd_quadratic
from .penalty import PenaltyParams, mcp_derivative

logger = logging.getLogger(__name__)

ORACLE_RIDGE = 1e-8


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-7
    max_iter: int = 10_000
    warm_start: np.ndarray | None = None
    fit_intercept: bool = False
    standardize: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError(f"tol must be > 0, got {self.tol!r}")
        if int(self.max_iter) < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter!r}")

    def with_warm_start(self, beta) -> "SolverOptions":
        return replace(self, warm_start=None if beta is None else np.asarray(beta, dtype=float))


@dataclass
class Fit:
    beta: np.ndarray
    objective: float
    kkt_residual: float
    iterations: int
    converged: bool
    intercept: float = 0.0
    objective_trace: list[float] = field(default_factory=list)
    flags: tuple[str, ...] = ()

    @property
    def active_set(self) -> frozenset[int]:
        return frozenset(int(j) for j in np.flatnonzero(self.beta))


def kkt_residual(grad, beta, weights) -> float:
    """Largest violation of the weighted-l1 subgradient conditions."""
    grad = np.asarray(grad, dtype=float)
    beta = np.asarray(beta, dtype=float)
    weights = np.asarray(weights, dtype=float)
    viol = np.where(
        beta == 0.0,
        np.maximum(np.abs(grad) - weights, 0.0),
        np.abs(grad + weights * np.sign(beta)),
    )
    return float(viol.max()) if viol.size else 0.0


def _check_weights(weights, d):
    w = np.asarray(weights, dtype=float)
    if w.shape != (d,):
        raise ValueError(f"weights must have length {d}, got shape {w.shape}")
    if not np.all(np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and nonnegative")
    return w


def _weighted_lasso_arrays(X, r, w, family: GlmFamily, beta0, tol, max_iter):
    n, d = X.shape
    L = family.curvature_bound()
    beta = np.zeros(d) if beta0 is None else np.array(beta0, dtype=float)
    support = np.flatnonzero(beta)
    eta = X[:, support] @ beta[support]
    g = X.T @ family.dloss(r, eta) / n
    loss = float(np.mean(family.loss(r, eta)))
    obj = loss + float(w @ np.abs(beta))
    trace = [obj]
    sweeps = 0
    inner_tol = 0.1 * tol
    best = (obj, beta.copy(), g.copy())

    while True:
        resid = kkt_residual(g, beta, w)
        if resid <= tol or sweeps >= max_iter:
            break
        viol = np.abs(g) > w + inner_tol
        A = np.flatnonzero((beta != 0.0) | viol)
        XA = X[:, A]
        H = L * (XA.T @ XA) / n
        H = np.ascontiguousarray(H)
        bA = beta[A].copy()
        gA = g[A]
        lin = gA - H @ bA
        wA = np.ascontiguousarray(w[A])
        budget = max_iter - sweeps
        buf = np.empty(min(budget, 512) if family.quadratic else 0)
        k, _ = cd_quadratic(H, lin, wA, bA, inner_tol, budget, buf)
        if k == 0:
            # Inner problem already solved at this precision; nothing left to gain.
            break
        sweeps += k
        if family.quadratic:
            const = loss - float(gA @ beta[A]) + 0.5 * float(beta[A] @ H @ beta[A])
            trace.extend(float(v) + const for v in buf[: min(k, buf.shape[0])])
        beta = np.zeros(d)
        beta[A] = bA
        eta = XA @ bA
        g = X.T @ family.dloss(r, eta) / n
        loss = float(np.mean(family.loss(r, eta)))
        obj = loss + float(w @ np.abs(beta))
        if not family.quadratic:
            trace.append(obj)
        if obj <= best[0]:
            best = (obj, beta.copy(), g.copy())

    resid = kkt_residual(g, beta, w)
    converged = resid <= tol
    if not converged and best[0] < obj:
        obj, beta, g = best
        resid = kkt_residual(g, beta, w)
    flags = ()
    if not family.quadratic and np.any(np.abs(eta) >= ETA_CLAMP):
        flags = ("eta_clamped",)
    return Fit(
        beta=beta,
        objective=obj,
        kkt_residual=resid,
        iterations=sweeps,
        converged=converged,
        objective_trace=trace,
        flags=flags,
    )


def _design(dataset: Dataset, weights, options: SolverOptions):
    """Apply the intercept/standardization flags; return the transformed problem."""
    X, r = dataset.X, dataset.r
    w = weights
    scale = None
    if options.standardize:
        scale = np.sqrt(np.mean(X**2, axis=0))
        scale[scale == 0.0] = 1.0
        X = X / scale
    if options.fit_intercept:
        X = np.hstack([X, np.ones((X.shape[0], 1))])
        w = np.append(w, 0.0)
    return X, r, w, scale


def _to_design_coef(beta, d, scale, options):
    if beta is None:
        return None
    beta = np.asarray(beta, dtype=float)
    if beta.shape[0] == d:
        b = beta if scale is None else beta * scale
        return np.append(b, 0.0) if options.fit_intercept else b.copy()
    if options.fit_intercept and beta.shape[0] == d + 1:
        b = beta[:d] if scale is None else beta[:d] * scale
        return np.append(b, beta[d])
    raise ValueError(f"warm start must have length {d}, got {beta.shape[0]}")


def _from_design(fit: Fit, d, scale, options) -> Fit:
    b = fit.beta
    if options.fit_intercept:
        fit.intercept = float(b[d])
        b = b[:d]
    if scale is not None:
        b = b / scale
    fit.beta = b
    return fit


def weighted_lasso_fit(dataset: Dataset, weights, family: GlmFamily,
                       options: SolverOptions | None = None) -> Fit:
    """Minimize ``nll(beta) + sum_j weights[j] * |beta[j]|``.

    Non-convergence within ``options.max_iter`` sweeps is reported through
    ``Fit.converged`` and the best iterate is returned. With
    ``standardize=True`` the weights act on coefficients of unit-RMS columns.
    """
    options = options or SolverOptions()
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    d = dataset.d
    w = _check_weights(weights, d)
    family.check_rewards(dataset.r)
    X, r, w, scale = _design(dataset, w, options)
    beta0 = _to_design_coef(options.warm_start, d, scale, options)
    fit = _weighted_lasso_arrays(X, r, w, family, beta0, options.tol, int(options.max_iter))
    if not fit.converged:
        logger.debug("weighted lasso stopped after %d sweeps, KKT residual %.3g",
                     fit.iterations, fit.kkt_residual)
    return _from_design(fit, d, scale, options)


def lasso_fit(dataset: Dataset, lam: float, family: GlmFamily,
              options: SolverOptions | None = None) -> Fit:
    if not lam >= 0:
        raise ValueError(f"lambda must be >= 0, got {lam!r}")
    return weighted_lasso_fit(dataset, np.full(dataset.d, float(lam)), family, options)


def mcp_weights(beta1, params: PenaltyParams) -> np.ndarray:
    """Second-step weights: MCP slope at nonzero coefficients, ``lam`` at zeros."""
    beta1 = np.asarray(beta1, dtype=float)
    return np.where(beta1 != 0.0, mcp_derivative(np.abs(beta1), params), params.lam)


def two_step_weighted_lasso(dataset: Dataset, params: PenaltyParams, family: GlmFamily,
                            options: SolverOptions | None = None) -> Fit:
    """Lasso at ``params.lam``, then a weighted Lasso with MCP-slope weights.

    The second step is warm-started at the first-step solution.
    """
    options = options or SolverOptions()
    step1 = lasso_fit(dataset, params.lam, family, options)
    w = mcp_weights(step1.beta, params)
    warm = step1.beta if not options.fit_intercept else np.append(step1.beta, step1.intercept)
    step2 = weighted_lasso_fit(dataset, w, family, options.with_warm_start(warm))
    step2.iterations += step1.iterations
    if not step1.converged:
        step2.converged = False
        step2.flags = step2.flags + ("step1_unconverged",)
    return step2


def oracle_fit(dataset: Dataset, support: Iterable[int], family: GlmFamily,
               options: SolverOptions | None = None, max_newton: int = 100) -> Fit:
    """Unpenalized MLE with coefficients forced to zero off ``support``.

    Damped Newton on the restricted coordinates. A numerically singular
    restricted Hessian gets a ``1e-8`` ridge and the fit is marked
    unconverged, as is a logistic fit whose linear predictor hits the clamp.
    """
    options = options or SolverOptions()
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    d = dataset.d
    S = np.array(sorted(set(int(j) for j in support)), dtype=int)
    if S.size and (S.min() < 0 or S.max() >= d):
        raise ValueError(f"support indices must lie in [0, {d})")
    X, r = dataset.X, dataset.r
    family.check_rewards(r)
    n = X.shape[0]
    beta = np.zeros(d)
    if S.size == 0:
        loss = float(np.mean(family.loss(r, np.zeros(n))))
        return Fit(beta=beta, objective=loss, kkt_residual=0.0, iterations=0,
                   converged=True, objective_trace=[loss])

    XS = X[:, S]
    b = np.zeros(S.size)
    if options.warm_start is not None:
        b = np.asarray(options.warm_start, dtype=float)[S].copy()
    eta = XS @ b
    loss = float(np.mean(family.loss(r, eta)))
    trace = [loss]
    flags: list[str] = []
    converged = False
    it = 0
    for it in range(1, max_newton + 1):
        g = XS.T @ family.dloss(r, eta) / n
        if np.max(np.abs(g)) <= options.tol:
            converged = True
            it -= 1
            break
        Hs = (XS * family.d2loss(r, eta)[:, None]).T @ XS / n
        evals = np.linalg.eigvalsh(Hs)
        if evals[0] <= 1e-12 * max(evals[-1], 1e-300):
            Hs = Hs + ORACLE_RIDGE * np.eye(S.size)
            if "ridge_fallback" not in flags:
                flags.append("ridge_fallback")
        step = np.linalg.solve(Hs, g)
        t = 1.0
        while True:
            cand = b - t * step
            eta_c = XS @ cand
            loss_c = float(np.mean(family.loss(r, eta_c)))
            if loss_c <= loss + 1e-4 * t * float(g @ -step) or t < 1e-10:
                break
            t *= 0.5
        if loss_c > loss:
            break
        b, eta, loss = cand, eta_c, loss_c
        trace.append(loss)
    g = XS.T @ family.dloss(r, eta) / n
    resid = float(np.max(np.abs(g)))
    converged = converged or resid <= options.tol
    if not family.quadratic and np.any(np.abs(eta) >= ETA_CLAMP):
        flags.append("eta_clamped")
    if flags:
        converged = False
    beta[S] = b
    return Fit(beta=beta, objective=loss, kkt_residual=resid, iterations=it,
               converged=converged, objective_trace=trace, flags=tuple(flags))
