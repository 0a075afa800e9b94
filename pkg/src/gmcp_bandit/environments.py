"""Context/reward environments: synthetic presets and full-feedback CSV replay."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .glm import GlmFamily, LinearGaussian


class EndOfStream(Exception):
    """Raised by :meth:`ReplayEnv.next_context` once every row has been served."""


class ReplayFormatError(ValueError):
    def __init__(self, message: str, row: int | None = None, column: int | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        super().__init__(f"{', '.join(loc)}: {message}" if loc else message)
        self.row = row
        self.column = column


class Environment:
    K: int
    d: int

    def next_context(self, rng) -> np.ndarray:
        raise NotImplementedError

    def expected_rewards(self, x) -> np.ndarray:
        raise NotImplementedError

    def realize_reward(self, arm: int, x, rng) -> float:
        raise NotImplementedError

    def oracle_expected(self, arm: int, x) -> float:
        self._check_arm(arm)
        return float(self.expected_rewards(x)[arm])

    def best_arm(self, x) -> int:
        return int(np.argmax(self.expected_rewards(x)))

    def _check_arm(self, arm):
        if not 0 <= arm < self.K:
            raise IndexError(f"arm {arm} out of range for K={self.K}")


@dataclass
class SyntheticEnv(Environment):
    """Covariates iid N(0, I_d); rewards from ``family`` with per-arm true betas."""

    true_betas: np.ndarray
    family: GlmFamily = field(default_factory=LinearGaussian)
    covariate_law: str = "StandardNormal"

    def __post_init__(self):
        self.true_betas = np.atleast_2d(np.asarray(self.true_betas, dtype=float))
        if self.covariate_law != "StandardNormal":
            raise ValueError(f"unsupported covariate law {self.covariate_law!r}")
        self.K, self.d = self.true_betas.shape

    def next_context(self, rng):
        return rng.standard_normal(self.d)

    def expected_rewards(self, x):
        return np.asarray(self.family.mean(self.true_betas @ np.asarray(x, dtype=float)), dtype=float)

    def realize_reward(self, arm, x, rng):
        self._check_arm(arm)
        eta = float(self.true_betas[arm] @ np.asarray(x, dtype=float))
        return float(self.family.sample(eta, rng))


class ReplayEnv(Environment):
    """Full-feedback replay: each row records every arm's reward.

    Realized and expected rewards are both the recorded table entry of the
    row most recently served by :meth:`next_context`.
    """

    def __init__(self, contexts, rewards, order=None):
        self.contexts = np.asarray(contexts, dtype=float)
        self.rewards = np.asarray(rewards, dtype=float)
        if self.contexts.ndim != 2 or self.rewards.ndim != 2:
            raise ValueError("contexts and rewards must be 2-d tables")
        if self.contexts.shape[0] != self.rewards.shape[0]:
            raise ValueError("contexts and rewards have different row counts")
        self.n, self.d = self.contexts.shape
        self.K = self.rewards.shape[1]
        self.order = np.arange(self.n) if order is None else np.asarray(order, dtype=int)
        self.cursor = 0
        self._row: int | None = None

    def permuted(self, rng) -> "ReplayEnv":
        """Fresh stream over the same table in a random row order."""
        return ReplayEnv(self.contexts, self.rewards, rng.permutation(self.n))

    def next_context(self, rng=None):
        if self.cursor >= self.n:
            raise EndOfStream(f"replay exhausted after {self.n} rows")
        self._row = int(self.order[self.cursor])
        self.cursor += 1
        return self.contexts[self._row].copy()

    def _current(self):
        if self._row is None:
            raise RuntimeError("no context has been served yet")
        return self.rewards[self._row]

    def expected_rewards(self, x):
        return self._current().copy()

    def realize_reward(self, arm, x, rng=None):
        self._check_arm(arm)
        return float(self._current()[arm])


def make_study1(d: int = 100) -> SyntheticEnv:
    """Two arms, beta_1 = (1,2,3,4,5,0,...), beta_2 = 1.1 * beta_1, unit Gaussian noise."""
    if d < 5:
        raise ValueError(f"study 1 needs d >= 5, got {d}")
    b1 = np.zeros(d)
    b1[:5] = [1.0, 2.0, 3.0, 4.0, 5.0]
    return SyntheticEnv(np.vstack([b1, 1.1 * b1]), LinearGaussian(1.0))


def make_study2(K: int, seed, d: int = 100, s: int = 5) -> SyntheticEnv:
    """K arms sharing support {0..s-1} with N(0,1) coefficients drawn from ``seed``."""
    if K < 2:
        raise ValueError("study 2 needs K >= 2")
    if d < s:
        raise ValueError(f"study 2 needs d >= {s}, got {d}")
    rng = np.random.default_rng(seed)
    betas = np.zeros((K, d))
    betas[:, :s] = rng.standard_normal((K, s))
    return SyntheticEnv(betas, LinearGaussian(1.0))


def _parse_header(header):
    xs, rs = [], []
    for col, name in enumerate(header, start=1):
        name = name.strip()
        if name.startswith("x_") and name[2:].isdigit():
            if rs:
                raise ReplayFormatError(f"covariate column {name!r} after reward columns", 0, col)
            xs.append(int(name[2:]))
        elif name.startswith("r_") and name[2:].isdigit():
            rs.append(int(name[2:]))
        else:
            raise ReplayFormatError(f"unexpected column name {name!r}", 0, col)
    if xs != list(range(len(xs))) or not xs:
        raise ReplayFormatError("covariate columns must be x_0..x_{d-1} in order", 0)
    if rs != list(range(len(rs))) or len(rs) < 2:
        raise ReplayFormatError("reward columns must be r_0..r_{K-1} in order with K >= 2", 0)
    return len(xs), len(rs)


def load_replay(path) -> ReplayEnv:
    """Parse a replay CSV (header ``x_0..x_{d-1},r_0..r_{K-1}``).

    Errors carry 1-based data-row and column positions (the header is row 0).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ReplayFormatError("file is empty") from None
        d, K = _parse_header(header)
        width = d + K
        data = []
        for i, row in enumerate(reader, start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise ReplayFormatError(f"expected {width} fields ({d} covariates + {K} rewards), "
                                        f"found {len(row)}", i)
            vals = []
            for j, cell in enumerate(row, start=1):
                try:
                    v = float(cell)
                except ValueError:
                    raise ReplayFormatError(f"non-numeric value {cell!r}", i, j) from None
                if not np.isfinite(v):
                    raise ReplayFormatError(f"non-finite value {cell!r}", i, j)
                vals.append(v)
            data.append(vals)
    if not data:
        raise ReplayFormatError("no data rows")
    table = np.array(data)
    return ReplayEnv(table[:, :d], table[:, d:])


def write_replay(path, contexts, rewards) -> None:
    contexts = np.asarray(contexts, dtype=float)
    rewards = np.asarray(rewards, dtype=float)
    header = [f"x_{j}" for j in range(contexts.shape[1])] + [f"r_{k}" for k in range(rewards.shape[1])]
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for x, r in zip(contexts, rewards):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in r])


def make_dosing_fixture(n: int = 600, d: int = 93, seed: int = 0):
    """Warfarin-shaped synthetic table: 3 dose arms, reward 0 if correct else -1.

    Column 0 is a constant 1; a few binary and continuous covariates drive a
    latent dose score, the rest are noise. Roughly half the rows favour the
    middle dose. Returns ``(contexts, rewards)``.
    """
    rng = np.random.default_rng(seed)
    X = np.empty((n, d))
    X[:, 0] = 1.0
    n_bin = d // 2
    X[:, 1:n_bin] = (rng.random((n, n_bin - 1)) < 0.3).astype(float)
    X[:, n_bin:] = rng.standard_normal((n, d - n_bin))
    score = 1.2 * X[:, n_bin] - 0.9 * X[:, n_bin + 1] + 1.5 * X[:, 1] - 1.0 * X[:, 2] + 0.7 * X[:, 3]
    score = score - np.median(score)
    lo, hi = np.quantile(score, [0.22, 0.76])
    dose = np.where(score < lo, 0, np.where(score > hi, 2, 1))
    rewards = -np.ones((n, 3))
    rewards[np.arange(n), dose] = 0.0
    return X, rewards
