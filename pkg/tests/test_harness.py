import math

import numpy as np
import pytest

from gmcp_bandit.environments import make_dosing_fixture, write_replay
from gmcp_bandit.harness import (
    ExperimentSpec,
    emit_results,
    load_config,
    manifest_path,
    parse_config,
    read_results,
    run_experiment,
    run_trial,
    spec_from_mapping,
)


def _small(**kw):
    base = dict(env="study1", d=10, T=60, trials=3, policies=("gmcp", "ols_bandit", "random", "oracle"))
    base.update(kw)
    return ExperimentSpec(**base)


class TestTrial:
    def test_same_seed_same_trace(self):
        spec = _small()
        a, b = run_trial(spec, "gmcp", 5), run_trial(spec, "gmcp", 5)
        np.testing.assert_array_equal(a.arm, b.arm)
        np.testing.assert_array_equal(a.cumulative_regret, b.cumulative_regret)

    def test_policies_share_contexts(self):
        # the oracle's best-arm expected value depends only on the context stream
        spec = _small()
        a, b = run_trial(spec, "random", 2), run_trial(spec, "ols_bandit", 2)
        np.testing.assert_array_equal(a.oracle_expected_best, b.oracle_expected_best)

    def test_oracle_has_zero_regret(self):
        tr = run_trial(_small(), "oracle", 0)
        assert np.all(tr.cumulative_regret == 0) and tr.optimal.all()

    def test_regret_nondecreasing(self):
        for p in ("gmcp", "random"):
            tr = run_trial(_small(), p, 1)
            assert np.all(np.diff(tr.cumulative_regret) >= 0)
            np.testing.assert_allclose(
                tr.cumulative_regret, np.cumsum(tr.oracle_expected_best - tr.policy_expected_chosen))

    def test_replay_truncates(self, tmp_path, caplog):
        X, R = make_dosing_fixture(n=30, seed=1)
        p = tmp_path / "r.csv"
        write_replay(p, X, R)
        spec = ExperimentSpec(env="replay", replay_path=str(p), T=50, trials=1, policies=("random",))
        tr = run_trial(spec, "random", 0)
        assert len(tr) == 30
        assert "truncating" in caplog.text


class TestAggregate:
    def test_mean_and_se(self):
        spec = _small(policies=("random",), trials=4)
        res = run_experiment(spec)
        finals = [run_trial(spec, "random", s).cumulative_regret[-1] for s in range(4)]
        assert res.mean_regret["random"][-1] == pytest.approx(np.mean(finals))
        assert res.se_regret["random"][-1] == pytest.approx(np.std(finals, ddof=1) / 2)

    def test_single_trial_se_zero(self):
        res = run_experiment(_small(trials=1, policies=("random",)))
        assert np.all(res.se_regret["random"] == 0)

    def test_serial_parallel_identical(self, tmp_path):
        spec = _small(policies=("gmcp", "random"), trials=2)
        a = emit_results(run_experiment(spec, workers=1), tmp_path / "a.csv")
        b = emit_results(run_experiment(spec, workers=2), tmp_path / "b.csv")
        assert a.read_bytes() == b.read_bytes()


class TestOutput:
    def test_csv_round_trip(self, tmp_path):
        spec = _small(report_optimal=True)
        res = run_experiment(spec)
        path = emit_results(res, tmp_path / "out.csv", spec)
        back = read_results(path)
        assert set(back) == set(spec.policies)
        for p in spec.policies:
            np.testing.assert_array_equal(back[p]["mean_regret"], res.mean_regret[p])
            np.testing.assert_array_equal(back[p]["se_regret"], res.se_regret[p])
            np.testing.assert_array_equal(back[p]["optimal_fraction"], res.optimal_fraction[p])
            np.testing.assert_array_equal(back[p]["t"], np.arange(1, spec.T + 1))

    def test_optimal_fraction_blank_for_synthetic(self, tmp_path):
        spec = _small(policies=("random",), trials=2)
        path = emit_results(run_experiment(spec), tmp_path / "o.csv", spec)
        assert all(math.isnan(v) for v in read_results(path)["random"]["optimal_fraction"])

    def test_manifest_has_hyperparameters(self, tmp_path):
        spec = _small(lambda1_0=0.7, h=3.0)
        path = emit_results(run_experiment(spec), tmp_path / "m.csv", spec)
        m = parse_config(manifest_path(path).read_text())
        for key in ("lambda1_0", "lambda2_0", "a", "t0", "h"):
            assert key in m and f"meta.gmcp.{key}" in m
        assert m["meta.gmcp.lambda1_0"] == "0.7" and m["h"] == "3.0"
        assert m["meta.seeds"] == "0..2"

    def test_manifest_rebuilds_spec(self, tmp_path):
        spec = _small(fidelity=True, t0=11.0)
        path = emit_results(run_experiment(spec), tmp_path / "m.csv", spec)
        assert load_config(manifest_path(path)) == spec


class TestConfig:
    def test_parse_comments_and_blanks(self):
        assert parse_config("# hi\n\nT = 5  # horizon\nenv=study2\n") == {"T": "5", "env": "study2"}

    def test_bad_line(self):
        with pytest.raises(ValueError, match="line 1"):
            parse_config("oops\n")

    @pytest.mark.parametrize("mapping", [
        {"T": "abc"}, {"fidelity": "maybe"}, {"unknown": "1"}, {"policies": "gmcp,nope"},
        {"env": "mars"}, {"env": "replay"}, {"trials": "0"},
    ])
    def test_malformed(self, mapping):
        with pytest.raises(ValueError):
            spec_from_mapping(mapping)

    def test_types(self):
        s = spec_from_mapping({"T": "7", "h": "2.5", "fidelity": "true", "policies": "gmcp, oful"})
        assert (s.T, s.h, s.fidelity, s.policies) == (7, 2.5, True, ("gmcp", "oful"))
