"""Generalized-linear reward families and the sample containers they act on.

Two families ship: :class:`LinearGaussian` and :class:`LogisticBinary`.
Negative log-densities drop additive constants that do not depend on the
linear predictor ``eta``; estimators and KKT checks are unaffected.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterator, NamedTuple

import numpy as np

ETA_CLAMP = 30.0


class Observation(NamedTuple):
    x: np.ndarray
    r: float


class GlmFamily:
    """Base class for reward families.

    Subclasses provide the per-row loss, its derivative in ``eta``, the mean
    reward, a global curvature bound and a sampler. All methods accept numpy
    arrays elementwise.
    """

    #: True when the negative log-density is exactly quadratic in eta.
    quadratic = False

    def loss(self, r, eta):
        raise NotImplementedError

    def dloss(self, r, eta):
        raise NotImplementedError

    def d2loss(self, r, eta):
        raise NotImplementedError

    def mean(self, eta):
        raise NotImplementedError

    def curvature_bound(self) -> float:
        raise NotImplementedError

    def sample(self, eta, rng):
        raise NotImplementedError

    def check_rewards(self, r) -> None:
        pass


@dataclass(frozen=True)
class LinearGaussian(GlmFamily):
    noise_sd: float = 1.0

    quadratic = True

    def __post_init__(self):
        if not (self.noise_sd > 0 and np.isfinite(self.noise_sd)):
            raise ValueError(f"noise_sd must be positive and finite, got {self.noise_sd!r}")

    def loss(self, r, eta):
        return (r - eta) ** 2 / (2.0 * self.noise_sd**2)

    def dloss(self, r, eta):
        return (eta - r) / self.noise_sd**2

    def d2loss(self, r, eta):
        return np.full_like(np.asarray(eta, dtype=float), 1.0 / self.noise_sd**2)

    def mean(self, eta):
        return eta

    def curvature_bound(self) -> float:
        return 1.0 / self.noise_sd**2

    def sample(self, eta, rng):
        return eta + self.noise_sd * rng.standard_normal(np.shape(eta))


@dataclass(frozen=True)
class LogisticBinary(GlmFamily):
    """Binary click model; a click pays ``payoff`` and rewards are 0 or payoff."""

    payoff: float = 1.0

    def __post_init__(self):
        if not (self.payoff > 0 and np.isfinite(self.payoff)):
            raise ValueError(f"payoff must be positive and finite, got {self.payoff!r}")

    def check_rewards(self, r) -> None:
        r = np.asarray(r, dtype=float)
        bad = (r != 0.0) & (r != self.payoff)
        if np.any(bad):
            raise ValueError(
                f"LogisticBinary(payoff={self.payoff}) rewards must be 0 or {self.payoff}; "
                f"got {r[bad].ravel()[0]!r}"
            )

    def _prob(self, eta):
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        return 1.0 / (1.0 + np.exp(-eta))

    def loss(self, r, eta):
        y = np.asarray(r, dtype=float) / self.payoff
        eta = np.clip(eta, -ETA_CLAMP, ETA_CLAMP)
        # -[y log p + (1-y) log(1-p)] == log(1 + e^eta) - y * eta
        return np.logaddexp(0.0, eta) - y * eta

    def dloss(self, r, eta):
        return self._prob(eta) - np.asarray(r, dtype=float) / self.payoff

    def d2loss(self, r, eta):
        p = self._prob(eta)
        return p * (1.0 - p)

    def mean(self, eta):
        return self.payoff * self._prob(eta)

    def curvature_bound(self) -> float:
        return 0.25

    def sample(self, eta, rng):
        p = self._prob(eta)
        return np.where(rng.random(np.shape(eta)) < p, self.payoff, 0.0)


class Dataset:
    """Append-only table of observations backed by growable numpy buffers."""

    def __init__(self, d: int, capacity: int = 16):
        if d < 1:
            raise ValueError("covariate dimension must be >= 1")
        self.d = int(d)
        self._X = np.empty((max(capacity, 1), self.d))
        self._r = np.empty(max(capacity, 1))
        self._n = 0

    @classmethod
    def from_arrays(cls, X, r) -> "Dataset":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        r = np.asarray(r, dtype=float).ravel()
        if X.shape[0] != r.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but r has {r.shape[0]}")
        ds = cls(X.shape[1], capacity=X.shape[0])
        ds._X[: X.shape[0]] = X
        ds._r[: X.shape[0]] = r
        ds._n = X.shape[0]
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(r))):
            raise ValueError("dataset entries must be finite")
        return ds

    def append(self, x, r: float) -> None:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"expected covariate vector of length {self.d}, got shape {x.shape}")
        if not (np.all(np.isfinite(x)) and np.isfinite(r)):
            raise ValueError("observation entries must be finite")
        if self._n == self._X.shape[0]:
            cap = 2 * self._X.shape[0]
            X = np.empty((cap, self.d))
            X[: self._n] = self._X[: self._n]
            rr = np.empty(cap)
            rr[: self._n] = self._r[: self._n]
            self._X, self._r = X, rr
        self._X[self._n] = x
        self._r[self._n] = r
        self._n += 1

    @property
    def X(self) -> np.ndarray:
        return self._X[: self._n]

    @property
    def r(self) -> np.ndarray:
        return self._r[: self._n]

    @property
    def rows(self) -> list[Observation]:
        return list(self)

    def __len__(self) -> int:
        return self._n

    def __iter__(self) -> Iterator[Observation]:
        for i in range(self._n):
            yield Observation(self._X[i].copy(), float(self._r[i]))

    def __repr__(self) -> str:
        return f"Dataset(n={self._n}, d={self.d})"


def neg_log_density(family: GlmFamily, r: float, eta: float) -> float:
    family.check_rewards(r)
    return float(family.loss(r, eta))


def _arrays(dataset, beta):
    if len(dataset) == 0:
        raise ValueError("dataset is empty")
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (dataset.d,):
        raise ValueError(f"beta must have length {dataset.d}, got shape {beta.shape}")
    return dataset.X, dataset.r, beta


def nll(dataset: Dataset, beta, family: GlmFamily) -> float:
    """Average negative log-likelihood of ``beta`` over ``dataset``."""
    X, r, beta = _arrays(dataset, beta)
    family.check_rewards(r)
    return float(np.mean(family.loss(r, X @ beta)))


def nll_gradient(dataset: Dataset, beta, family: GlmFamily) -> np.ndarray:
    X, r, beta = _arrays(dataset, beta)
    family.check_rewards(r)
    return X.T @ family.dloss(r, X @ beta) / X.shape[0]


def curvature_bound(family: GlmFamily) -> float:
    return family.curvature_bound()


def expected_reward(family: GlmFamily, x, beta) -> float:
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x.shape != beta.shape:
        raise ValueError(f"x and beta lengths differ: {x.shape} vs {beta.shape}")
    return float(family.mean(x @ beta))


def sample_reward(family: GlmFamily, x, beta, rng) -> float:
    x = np.asarray(x, dtype=float)
    beta = np.asarray(beta, dtype=float)
    if x.shape != beta.shape:
        raise ValueError(f"x and beta lengths differ: {x.shape} vs {beta.shape}")
    return float(family.sample(float(x @ beta), rng))
