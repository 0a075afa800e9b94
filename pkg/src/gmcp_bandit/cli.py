"""Command-line entry point: ``gmcp-bandit {run,preset,replay,validate}``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .environments import ReplayFormatError, load_replay
from .harness import ExperimentSpec, emit_results, load_config, run_experiment, spec_from_mapping

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

# flags that map onto spec fields (``seed`` becomes ``base_seed``)
_OVERRIDES = (
    "policies", "T", "trials", "seed", "t0", "h", "lambda1_0", "lambda2_0", "a",
    "refit_every", "output", "workers", "family", "noise_sd", "payoff",
    "fidelity", "report_optimal", "d", "K",
)


class ConfigError(Exception):
    pass


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--policies", help="comma-separated policy ids")
    p.add_argument("--T", type=int, help="horizon")
    p.add_argument("--trials", type=int)
    p.add_argument("--seed", type=int, help="base seed; trial i uses seed+i")
    p.add_argument("--t0", type=float)
    p.add_argument("--h", type=float)
    p.add_argument("--lambda1-0", dest="lambda1_0", type=float)
    p.add_argument("--lambda2-0", dest="lambda2_0", type=float)
    p.add_argument("--a", type=float, help="MCP concavity parameter")
    p.add_argument("--refit-every", dest="refit_every", type=int)
    p.add_argument("--family", choices=["linear", "logistic"])
    p.add_argument("--noise-sd", dest="noise_sd", type=float)
    p.add_argument("--payoff", type=float)
    p.add_argument("--fidelity", action="store_true", default=None,
                   help="refit every estimator at every step")
    p.add_argument("--report-optimal", dest="report_optimal", action="store_true", default=None)
    p.add_argument("--workers", type=int)
    p.add_argument("-o", "--output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="gmcp-bandit", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="verb", required=True)

    run = sub.add_parser("run", help="run an experiment from a key=value config file")
    run.add_argument("config")
    _add_common(run)

    preset = sub.add_parser("preset", help="run a built-in synthetic study")
    preset.add_argument("study", choices=["study1", "study2"])
    preset.add_argument("--d", type=int)
    preset.add_argument("--K", type=int)
    _add_common(preset)

    replay = sub.add_parser("replay", help="run policies on a logged replay CSV")
    replay.add_argument("csv")
    _add_common(replay)

    validate = sub.add_parser("validate", help="parse-check a replay CSV")
    validate.add_argument("csv")
    return parser


def _overrides(ns) -> dict:
    out = {}
    for k in _OVERRIDES:
        v = getattr(ns, k, None)
        if v is None:
            continue
        out["base_seed" if k == "seed" else k] = v
    return out


def _spec(ns) -> ExperimentSpec:
    try:
        if ns.verb == "run":
            path = Path(ns.config)
            if not path.is_file():
                raise ConfigError(f"config file not found: {path}")
            return load_config(path, **_overrides(ns))
        if ns.verb == "preset":
            return spec_from_mapping({"env": ns.study}, **_overrides(ns))
        return spec_from_mapping({"env": "replay", "replay_path": ns.csv}, **_overrides(ns))
    except (ValueError, TypeError) as exc:
        raise ConfigError(str(exc)) from exc


def _check_output(path: Path) -> None:
    parent = path.parent if str(path.parent) else Path(".")
    if not parent.is_dir():
        raise ConfigError(f"output directory does not exist: {parent}")


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if ns.verb == "validate":
        try:
            env = load_replay(ns.csv)
        except (ReplayFormatError, OSError) as exc:
            print(f"invalid: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        print(f"ok: {env.contexts.shape[0]} rows, d={env.d}, K={env.K}")
        return EXIT_OK

    try:
        spec = _spec(ns)
        if spec.env == "replay":
            load_replay(spec.replay_path)
        out = Path(spec.output)
        _check_output(out)
    except (ConfigError, ReplayFormatError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        result = run_experiment(spec)
        emit_results(result, out, spec)
    except Exception as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    for p in result.policies:
        print(f"{p}: final mean regret {result.mean_regret[p][-1]:.3f} "
              f"(se {result.se_regret[p][-1]:.3f})")
    print(f"wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
