"""Experiment orchestration: seeded trials, regret traces, aggregation, output.

Regret is accumulated from expected rewards under the environment's true
parameters, never from realized rewards. Trial ``i`` uses seed
``base_seed + i``; each seed is split into independent streams for the
environment build, contexts, reward noise and the policy, so every policy
sees the same contexts on the same trial index.
"""
from __future__ import annotations

import csv
import functools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import __version__
from .bandit import GmcpBandit, GmcpConfig, LassoBandit, OlsBandit, Oful, OraclePolicy, RandomPolicy
from .environments import EndOfStream, load_replay, make_study1, make_study2
from .glm import LinearGaussian, LogisticBinary
from .kernels import BACKEND
from .solver import SolverOptions

logger = logging.getLogger(__name__)

POLICIES = ("gmcp", "lasso_bandit", "ols_bandit", "oful", "random", "oracle")
ENVIRONMENTS = ("study1", "study2", "replay")


class TrialError(RuntimeError):
    def __init__(self, policy, seed, cause):
        super().__init__(f"trial failed for policy={policy} seed={seed}: {cause!r}")
        self.policy = policy
        self.seed = seed


@dataclass(frozen=True)
class ExperimentSpec:
    env: str = "study1"
    d: int = 100
    K: int = 2
    replay_path: str = ""
    family: str = "linear"
    noise_sd: float = 1.0
    payoff: float = 1.0
    policies: tuple[str, ...] = ("gmcp", "lasso_bandit", "ols_bandit", "oful")
    T: int = 1000
    trials: int = 10
    base_seed: int = 0
    t0: float | None = 20.0
    h: float = 20.0
    lambda1_0: float = 0.5
    lambda2_0: float = 2.0
    a: float = 2.0
    refit_every: int = 25
    fidelity: bool = False
    fit_intercept: bool = False
    solver_tol: float = 1e-6
    solver_max_iter: int = 2000
    ridge: float = 1.0
    oful_width: float = 1.0
    report_optimal: bool = False
    output: str = "results.csv"
    workers: int = 1

    def __post_init__(self):
        if self.env not in ENVIRONMENTS:
            raise ValueError(f"env must be one of {ENVIRONMENTS}, got {self.env!r}")
        if self.env == "replay" and not self.replay_path:
            raise ValueError("replay environment needs replay_path")
        if self.family not in ("linear", "logistic"):
            raise ValueError(f"family must be 'linear' or 'logistic', got {self.family!r}")
        if isinstance(self.policies, str):
            object.__setattr__(self, "policies", tuple(p.strip() for p in self.policies.split(",") if p.strip()))
        bad = [p for p in self.policies if p not in POLICIES]
        if bad or not self.policies:
            raise ValueError(f"unknown policies {bad}; choose from {POLICIES}")
        if self.T < 1 or self.trials < 1:
            raise ValueError("T and trials must be >= 1")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def glm_family(self):
        return LinearGaussian(self.noise_sd) if self.family == "linear" else LogisticBinary(self.payoff)

    def gmcp_config(self, K, d) -> GmcpConfig:
        return GmcpConfig(
            K=K, d=d, family=self.glm_family(), t0=self.t0, h=self.h,
            lambda1_0=self.lambda1_0, lambda2_0=self.lambda2_0, penalty_a=self.a,
            refit_every=self.refit_every, fidelity=self.fidelity, fit_intercept=self.fit_intercept,
            solver=SolverOptions(tol=self.solver_tol, max_iter=self.solver_max_iter),
        )


@dataclass
class RegretTrace:
    policy: str
    seed: int
    arm: np.ndarray
    was_random: np.ndarray
    realized_reward: np.ndarray
    oracle_expected_best: np.ndarray
    policy_expected_chosen: np.ndarray
    cumulative_regret: np.ndarray
    optimal: np.ndarray

    @property
    def t(self) -> np.ndarray:
        return np.arange(1, len(self.arm) + 1)

    def __len__(self):
        return len(self.arm)


@dataclass
class AggregateResult:
    policies: list[str]
    trials: int
    curves: dict[str, np.ndarray]
    optimal_curves: dict[str, np.ndarray]
    mean_regret: dict[str, np.ndarray] = field(init=False)
    se_regret: dict[str, np.ndarray] = field(init=False)
    optimal_fraction: dict[str, np.ndarray] = field(init=False)

    def __post_init__(self):
        self.mean_regret, self.se_regret, self.optimal_fraction = {}, {}, {}
        for p in self.policies:
            c = self.curves[p]
            self.mean_regret[p] = c.mean(axis=0)
            self.se_regret[p] = (c.std(axis=0, ddof=1) / math.sqrt(c.shape[0])
                                 if c.shape[0] > 1 else np.zeros(c.shape[1]))
            self.optimal_fraction[p] = self.optimal_curves[p].mean(axis=0)

    @property
    def horizon(self) -> int:
        return next(iter(self.curves.values())).shape[1]


@functools.lru_cache(maxsize=4)
def _replay_table(path):
    return load_replay(path)


def build_environment(spec: ExperimentSpec, rng):
    if spec.env == "study1":
        return make_study1(spec.d)
    if spec.env == "study2":
        return make_study2(spec.K, rng, d=spec.d)
    return _replay_table(str(spec.replay_path)).permuted(rng)


def make_policy(name: str, spec: ExperimentSpec, env):
    K, d = env.K, env.d
    if name == "gmcp":
        return GmcpBandit(spec.gmcp_config(K, d))
    if name == "lasso_bandit":
        return LassoBandit(spec.gmcp_config(K, d))
    if name == "ols_bandit":
        return OlsBandit(spec.gmcp_config(K, d), ridge=spec.ridge)
    if name == "oful":
        return Oful(K, d, spec.glm_family(), ridge=spec.ridge, width=spec.oful_width)
    if name == "random":
        return RandomPolicy(K)
    if name == "oracle":
        return OraclePolicy(env)
    raise ValueError(f"unknown policy {name!r}")


def trial_streams(seed: int):
    """Independent generators for (env build, contexts, reward noise, policy)."""
    return tuple(np.random.default_rng(ss) for ss in np.random.SeedSequence(seed).spawn(4))


def run_trial(spec: ExperimentSpec, policy_id: str, seed: int) -> RegretTrace:
    build_rng, ctx_rng, noise_rng, pol_rng = trial_streams(seed)
    env = build_environment(spec, build_rng)
    policy = make_policy(policy_id, spec, env)

    T = spec.T
    arm = np.zeros(T, dtype=int)
    was_random = np.zeros(T, dtype=bool)
    realized = np.zeros(T)
    best = np.zeros(T)
    chosen = np.zeros(T)
    steps = T
    for i in range(T):
        t = i + 1
        try:
            x = env.next_context(ctx_rng)
        except EndOfStream:
            logger.warning("replay stream has %d rows, truncating horizon T=%d", i, T)
            steps = i
            break
        dec = policy.select(x, t, pol_rng)
        mu = env.expected_rewards(x)
        r = env.realize_reward(dec.arm, x, noise_rng)
        policy.update(dec, x, r, t)
        arm[i] = dec.arm
        was_random[i] = dec.was_random
        realized[i] = r
        best[i] = mu.max()
        chosen[i] = mu[dec.arm]
    sl = slice(0, steps)
    inst = best[sl] - chosen[sl]
    return RegretTrace(
        policy=policy_id, seed=seed, arm=arm[sl], was_random=was_random[sl],
        realized_reward=realized[sl], oracle_expected_best=best[sl],
        policy_expected_chosen=chosen[sl], cumulative_regret=np.cumsum(inst),
        optimal=chosen[sl] >= best[sl],
    )


def _run_one(args):
    spec, policy, seed = args
    try:
        return run_trial(spec, policy, seed)
    except Exception as exc:  # surfaced with its (policy, seed) below
        raise TrialError(policy, seed, exc) from exc


def run_experiment(spec: ExperimentSpec, workers: int | None = None) -> AggregateResult:
    """Run every (policy, trial) pair and aggregate in trial-index order."""
    workers = spec.workers if workers is None else workers
    jobs = [(spec, p, spec.base_seed + i) for p in spec.policies for i in range(spec.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            traces = list(pool.map(_run_one, jobs))
    else:
        traces = [_run_one(j) for j in jobs]
    curves, optimal = {}, {}
    for p in spec.policies:
        ts = [tr for tr in traces if tr.policy == p]
        n = min(len(tr) for tr in ts)
        curves[p] = np.vstack([tr.cumulative_regret[:n] for tr in ts])
        steps = np.arange(1, n + 1)
        optimal[p] = np.vstack([np.cumsum(tr.optimal[:n]) / steps for tr in ts])
    return AggregateResult(list(spec.policies), spec.trials, curves, optimal)


# -- output --------------------------------------------------------------------

CSV_HEADER = ["policy", "t", "mean_regret", "se_regret", "optimal_fraction"]


def emit_results(result: AggregateResult, path, spec: ExperimentSpec | None = None,
                 include_optimal: bool | None = None) -> Path:
    """Write the long-format results CSV and, when ``spec`` is given, a manifest.

    Floats are written with ``repr`` so the CSV round-trips exactly.
    """
    path = Path(path)
    if include_optimal is None:
        include_optimal = spec is not None and (spec.report_optimal or spec.env == "replay")
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for p in result.policies:
            mean, se, opt = result.mean_regret[p], result.se_regret[p], result.optimal_fraction[p]
            for i in range(len(mean)):
                w.writerow([p, i + 1, repr(float(mean[i])), repr(float(se[i])),
                            repr(float(opt[i])) if include_optimal else ""])
    if spec is not None:
        write_manifest(spec, manifest_path(path), result)
    return path


def read_results(path) -> dict[str, dict[str, np.ndarray]]:
    out: dict[str, dict[str, list]] = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER:
            raise ValueError(f"unexpected header {reader.fieldnames}")
        for row in reader:
            cols = out.setdefault(row["policy"], {k: [] for k in CSV_HEADER[1:]})
            cols["t"].append(int(row["t"]))
            cols["mean_regret"].append(float(row["mean_regret"]))
            cols["se_regret"].append(float(row["se_regret"]))
            cols["optimal_fraction"].append(float(row["optimal_fraction"]) if row["optimal_fraction"] else math.nan)
    return {p: {k: np.asarray(v) for k, v in cols.items()} for p, cols in out.items()}


def manifest_path(results_path) -> Path:
    results_path = Path(results_path)
    return results_path.with_name(results_path.stem + ".manifest")


def _fmt(v):
    if v is None:
        return "auto"
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_manifest(spec: ExperimentSpec, path, result: AggregateResult | None = None) -> None:
    lines = [f"{f.name}={_fmt(getattr(spec, f.name))}" for f in fields(spec)]
    lines.append(f"meta.version={__version__}")
    lines.append(f"meta.kernel_backend={BACKEND}")
    lines.append(f"meta.seeds={spec.base_seed}..{spec.base_seed + spec.trials - 1}")
    env = build_environment(spec, np.random.default_rng(spec.base_seed))
    for p in spec.policies:
        for k, v in make_policy(p, spec, env).describe().items():
            lines.append(f"meta.{p}.{k}={_fmt(v)}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- flat key=value configs ----------------------------------------------------

_BOOL = {"true": True, "false": False, "1": True, "0": False, "yes": True, "no": False}


def parse_config(text: str) -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value, got {raw!r}")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k] = v
    return out


def spec_from_mapping(values: dict, **overrides) -> ExperimentSpec:
    """Build a spec from string values; ``meta.*`` keys are ignored."""
    types = {f.name: f.type for f in fields(ExperimentSpec)}
    kwargs = {}
    for k, v in {**values, **overrides}.items():
        if k.startswith("meta.") or v is None:
            continue
        if k not in types:
            raise ValueError(f"unknown config key {k!r}")
        kind = types[k]
        if kind.endswith(" | None"):
            if isinstance(v, str) and v.strip().lower() in ("", "auto"):
                kwargs[k] = None
                continue
            kind = kind[: -len(" | None")]
        if not isinstance(v, str):
            kwargs[k] = v
        elif kind == "bool":
            if v.lower() not in _BOOL:
                raise ValueError(f"{k}: expected a boolean, got {v!r}")
            kwargs[k] = _BOOL[v.lower()]
        elif kind == "int":
            kwargs[k] = int(v)
        elif kind == "float":
            kwargs[k] = float(v)
        elif kind.startswith("tuple"):
            kwargs[k] = tuple(p.strip() for p in v.split(",") if p.strip())
        else:
            kwargs[k] = v
    return ExperimentSpec(**kwargs)


def load_config(path, **overrides) -> ExperimentSpec:
    return spec_from_mapping(parse_config(Path(path).read_text(encoding="utf-8")), **overrides)
