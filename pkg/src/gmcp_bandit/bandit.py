"""G-MCP-Bandit and baseline policies behind a common select/update contract.

Every policy exposes ``select(x, t, rng) -> Decision`` and
``update(decision, x, r, t)``; the harness alternates the two strictly.

:class:`GmcpBandit`, :class:`LassoBandit` and :class:`OlsBandit` share one
scaffold: epsilon-decay random sampling plus the bi-level rule (prefilter
with the random-sample estimator, break ties inside the candidate set with
the whole-sample estimator). They differ only in the estimator used.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .glm import Dataset, GlmFamily, LinearGaussian
from .penalty import PenaltyParams
from .solver import SolverOptions, lasso_fit, two_step_weighted_lasso

logger = logging.getLogger(__name__)


def lambda1_schedule(t, d: int, lambda1_0: float) -> float:
    """Random-sample regularization: ``lambda1_0 * sqrt(1 + log d / log(t+1))``."""
    return lambda1_0 * math.sqrt(1.0 + math.log(d) / math.log(t + 1.0))


def lambda2_schedule(t, d: int, lambda2_0: float) -> float:
    """Whole-sample regularization: ``lambda2_0 * sqrt((log(t+1) + log d) / (t+1))``."""
    return lambda2_0 * math.sqrt((math.log(t + 1.0) + math.log(d)) / (t + 1.0))


# per-arm exploration constant; the default t0 = 2 * C0 * K keeps each arm's
# random sample at roughly C0 * (1 + log(T / t0)) draws or more
SAMPLING_C0 = 10.0


def epsilon_decay_draw(t: int, t0: float, rng) -> bool:
    """True with probability ``min(1, t0/t)``; always consumes one uniform draw."""
    if t < 1:
        raise ValueError("t must be >= 1")
    return bool(rng.random() < min(1.0, t0 / t))


@dataclass(frozen=True)
class Decision:
    arm: int
    was_random: bool
    candidate_set: tuple[int, ...] = ()


@dataclass
class GmcpConfig:
    K: int
    d: int
    family: GlmFamily = field(default_factory=LinearGaussian)
    t0: float | None = 20.0  # None: 2 * SAMPLING_C0 * K
    h: float = 20.0
    lambda1_0: float = 0.5
    lambda2_0: float = 2.0
    penalty_a: float = 2.0
    refit_every: int = 25
    fidelity: bool = False
    fit_intercept: bool = False
    solver: SolverOptions = field(default_factory=lambda: SolverOptions(tol=1e-6, max_iter=2000))

    def __post_init__(self):
        if self.K < 2:
            raise ValueError(f"need at least 2 arms, got K={self.K}")
        if self.t0 is None:
            self.t0 = 2.0 * SAMPLING_C0 * self.K
        if self.d < 1:
            raise ValueError(f"d must be >= 1, got {self.d}")
        for name in ("t0", "h", "lambda1_0", "lambda2_0", "penalty_a"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.refit_every < 1:
            raise ValueError("refit_every must be >= 1")


class ArmState:
    """Per-arm sample sets and estimators.

    ``random_set`` holds only epsilon-sampled observations; ``whole_set``
    holds every observation of the arm, so ``random_set`` is a subset.
    """

    def __init__(self, d: int):
        self.random_set = Dataset(d)
        self.whole_set = Dataset(d)
        self.beta_random = np.zeros(d)
        self.beta_whole = np.zeros(d)
        self.intercept_random = 0.0
        self.intercept_whole = 0.0


class Policy:
    name = "policy"

    def select(self, x, t: int, rng) -> Decision:
        raise NotImplementedError

    def update(self, decision: Decision, x, r: float, t: int) -> None:
        raise NotImplementedError

    def describe(self) -> dict:
        return {}


class RandomPolicy(Policy):
    name = "random"

    def __init__(self, K: int):
        self.K = K

    def select(self, x, t, rng):
        return Decision(int(rng.integers(self.K)), True)

    def update(self, decision, x, r, t):
        pass


class OraclePolicy(Policy):
    """Plays the environment's best arm under the true parameters."""

    name = "oracle"

    def __init__(self, env):
        self.env = env

    def select(self, x, t, rng):
        return Decision(self.env.best_arm(x), False)

    def update(self, decision, x, r, t):
        pass


class BiLevelPolicy(Policy):
    """Shared scaffold: epsilon-decay sampling plus the bi-level arm rule.

    Subclasses implement :meth:`_estimate`, returning ``(beta, intercept)``
    for a dataset at a given regularization level.
    """

    name = "bilevel"

    def __init__(self, config: GmcpConfig):
        self.config = config
        self.arms = [ArmState(config.d) for _ in range(config.K)]
        self.whole_reads = 0
        self.solver_failures = 0
        self._pending: int | None = None

    # -- estimation -----------------------------------------------------------
    def _estimate(self, dataset: Dataset, lam: float, warm: np.ndarray):
        raise NotImplementedError

    def _score(self, beta, intercept, x) -> float:
        return float(self.config.family.mean(float(x @ beta) + intercept))

    def _refit(self, k: int, which: str, lam: float) -> None:
        st = self.arms[k]
        data = st.random_set if which == "random" else st.whole_set
        if len(data) < 2:
            return
        warm = getattr(st, f"beta_{which}")
        try:
            beta, intercept = self._estimate(data, lam, warm)
        except (ValueError, FloatingPointError, np.linalg.LinAlgError) as exc:
            beta, intercept = None, None
            logger.warning("%s: %s fit for arm %d failed (%s); keeping previous estimate",
                           self.name, which, k, exc)
        if beta is None or not np.all(np.isfinite(beta)) or not np.isfinite(intercept):
            self.solver_failures += 1
            return
        setattr(st, f"beta_{which}", beta)
        setattr(st, f"intercept_{which}", float(intercept))

    # -- policy contract -------------------------------------------------------
    def select(self, x, t, rng):
        if self._pending is not None:
            raise RuntimeError(f"select at t={t} before update for t={self._pending}")
        cfg = self.config
        self._pending = t
        if epsilon_decay_draw(t, cfg.t0, rng):
            return Decision(int(rng.integers(cfg.K)), True)
        mu = np.array([self._score(s.beta_random, s.intercept_random, x) for s in self.arms])
        cands = np.flatnonzero(mu >= mu.max() - cfg.h / 2.0)
        if cands.size == 1:
            return Decision(int(cands[0]), False, (int(cands[0]),))
        self.whole_reads += 1
        whole = [self._score(self.arms[k].beta_whole, self.arms[k].intercept_whole, x)
                 for k in cands]
        return Decision(int(cands[int(np.argmax(whole))]), False, tuple(int(k) for k in cands))

    def update(self, decision, x, r, t):
        if self._pending != t:
            raise RuntimeError(f"update for t={t} does not match pending select {self._pending}")
        self._pending = None
        cfg = self.config
        x = np.asarray(x, dtype=float)
        st = self.arms[decision.arm]
        st.whole_set.append(x, r)
        if decision.was_random:
            st.random_set.append(x, r)
        lam1 = lambda1_schedule(t, cfg.d, cfg.lambda1_0)
        lam2 = lambda2_schedule(t, cfg.d, cfg.lambda2_0)
        if cfg.fidelity or t % cfg.refit_every == 0:
            for k in range(cfg.K):
                self._refit(k, "random", lam1)
                self._refit(k, "whole", lam2)
        else:
            if decision.was_random:
                self._refit(decision.arm, "random", lam1)
            self._refit(decision.arm, "whole", lam2)

    def describe(self):
        cfg = self.config
        return {
            "t0": cfg.t0, "h": cfg.h, "lambda1_0": cfg.lambda1_0, "lambda2_0": cfg.lambda2_0,
            "a": cfg.penalty_a, "refit_every": cfg.refit_every, "fidelity": cfg.fidelity,
            "fit_intercept": cfg.fit_intercept, "solver_tol": cfg.solver.tol,
            "solver_max_iter": cfg.solver.max_iter,
        }


class GmcpBandit(BiLevelPolicy):
    """G-MCP-Bandit: both estimators fitted by the 2-step weighted Lasso."""

    name = "gmcp"

    def _estimate(self, dataset, lam, warm):
        cfg = self.config
        opts = cfg.solver.with_warm_start(warm)
        opts = _with_intercept(opts, cfg.fit_intercept)
        fit = two_step_weighted_lasso(dataset, PenaltyParams(lam, cfg.penalty_a), cfg.family, opts)
        return fit.beta, fit.intercept


class LassoBandit(BiLevelPolicy):
    """Same scaffold with plain Lasso estimators."""

    name = "lasso_bandit"

    def _estimate(self, dataset, lam, warm):
        cfg = self.config
        opts = _with_intercept(cfg.solver.with_warm_start(warm), cfg.fit_intercept)
        fit = lasso_fit(dataset, lam, cfg.family, opts)
        return fit.beta, fit.intercept


class OlsBandit(BiLevelPolicy):
    """Same scaffold with ridge-stabilized least squares (linear predictor).

    Inverse Gram matrices are kept per arm and per sample set and updated by
    Sherman-Morrison, so a refit costs one matrix-vector product.
    """

    name = "ols_bandit"

    def __init__(self, config: GmcpConfig, ridge: float = 1.0):
        super().__init__(config)
        if not ridge > 0:
            raise ValueError("ridge must be positive")
        self.ridge = ridge
        d = config.d
        self._vinv = {(k, w): np.eye(d) / ridge for k in range(config.K) for w in ("random", "whole")}
        self._xr = {(k, w): np.zeros(d) for k in range(config.K) for w in ("random", "whole")}

    def _score(self, beta, intercept, x):
        return float(x @ beta)

    def _absorb(self, key, x, r):
        v = self._vinv[key]
        vx = v @ x
        v -= np.outer(vx, vx) / (1.0 + x @ vx)
        self._xr[key] += r * x

    def update(self, decision, x, r, t):
        x = np.asarray(x, dtype=float)
        self._absorb((decision.arm, "whole"), x, r)
        if decision.was_random:
            self._absorb((decision.arm, "random"), x, r)
        super().update(decision, x, r, t)

    def _refit(self, k, which, lam):
        st = self.arms[k]
        data = st.random_set if which == "random" else st.whole_set
        if len(data) < 2:
            return
        setattr(st, f"beta_{which}", self._vinv[(k, which)] @ self._xr[(k, which)])

    def describe(self):
        out = super().describe()
        out["ridge"] = self.ridge
        return out


class Oful(Policy):
    """Optimism in the face of uncertainty with per-arm ridge ellipsoids (linear only)."""

    name = "oful"

    def __init__(self, K: int, d: int, family: GlmFamily | None = None,
                 ridge: float = 1.0, width: float = 1.0):
        family = family if family is not None else LinearGaussian()
        if not isinstance(family, LinearGaussian):
            raise ValueError("OFUL is only defined for the linear-Gaussian family")
        if not (ridge > 0 and width >= 0):
            raise ValueError("ridge must be positive and width nonnegative")
        self.K, self.d, self.ridge, self.width = K, d, ridge, width
        self._vinv = [np.eye(d) / ridge for _ in range(K)]
        self._xr = [np.zeros(d) for _ in range(K)]

    def select(self, x, t, rng):
        x = np.asarray(x, dtype=float)
        ucb = np.empty(self.K)
        for k in range(self.K):
            v = self._vinv[k]
            vx = v @ x
            ucb[k] = (v @ self._xr[k]) @ x + self.width * math.sqrt(max(float(x @ vx), 0.0))
        return Decision(int(np.argmax(ucb)), False)

    def update(self, decision, x, r, t):
        x = np.asarray(x, dtype=float)
        v = self._vinv[decision.arm]
        vx = v @ x
        v -= np.outer(vx, vx) / (1.0 + x @ vx)
        self._xr[decision.arm] += r * x

    def describe(self):
        return {"ridge": self.ridge, "width": self.width}


def _with_intercept(opts: SolverOptions, fit_intercept: bool) -> SolverOptions:
    # the warm start carries coefficients only; the intercept restarts at 0
    return replace(opts, fit_intercept=True) if fit_intercept else opts
