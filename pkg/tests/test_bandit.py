import math

import numpy as np
import pytest

from gmcp_bandit.bandit import (
    Decision,
    GmcpBandit,
    GmcpConfig,
    LassoBandit,
    OlsBandit,
    Oful,
    OraclePolicy,
    RandomPolicy,
    epsilon_decay_draw,
    lambda1_schedule,
    lambda2_schedule,
)
from gmcp_bandit.environments import make_study1
from gmcp_bandit.glm import LinearGaussian, LogisticBinary


class TestSchedules:
    def test_lambda1_d1(self):
        assert lambda1_schedule(7, 1, 0.3) == 0.3

    def test_lambda1_value(self):
        assert lambda1_schedule(99, 10, 0.5) == pytest.approx(0.5 * math.sqrt(1.5), abs=1e-12)
        assert lambda1_schedule(99, 10, 0.5) == pytest.approx(0.61237, abs=1e-5)

    def test_lambda1_nonincreasing(self):
        vals = [lambda1_schedule(t, 50, 1.0) for t in range(1, 10_001)]
        assert np.all(np.diff(vals) <= 0)

    def test_lambda2_values(self):
        assert lambda2_schedule(math.e - 1, 1, 1.0) == pytest.approx(math.sqrt(1 / math.e), abs=1e-12)
        assert lambda2_schedule(999, 100, 0.1) == pytest.approx(0.01073, abs=1e-5)
        assert lambda2_schedule(10**6, 20, 1.0) < lambda2_schedule(10**3, 20, 1.0)

    def test_closed_forms_random_pairs(self):
        rng = np.random.default_rng(0)
        for _ in range(1000):
            t = int(rng.integers(1, 10**6))
            d = int(rng.integers(1, 10**4))
            l0 = rng.uniform(0.01, 5)
            assert abs(lambda1_schedule(t, d, l0) - l0 * np.sqrt(1 + np.log(d) / np.log(t + 1))) <= 1e-12
            assert abs(lambda2_schedule(t, d, l0) - l0 * np.sqrt((np.log(t + 1) + np.log(d)) / (t + 1))) <= 1e-12


class TestEpsilonDecay:
    def test_always_before_t0(self):
        rng = np.random.default_rng(0)
        assert all(epsilon_decay_draw(t, 20.0, rng) for t in range(1, 21) for _ in range(50))

    def test_frequency(self):
        rng = np.random.default_rng(1)
        freq = np.mean([epsilon_decay_draw(40, 20.0, rng) for _ in range(10_000)])
        assert abs(freq - 0.5) <= 0.02

    def test_rejects_t0(self):
        with pytest.raises(ValueError):
            epsilon_decay_draw(0, 5.0, np.random.default_rng(0))


def _gmcp(K=2, d=5, **kw):
    return GmcpBandit(GmcpConfig(K=K, d=d, **kw))


class TestBiLevelSelect:
    def _force(self, policy, random_mu, whole_mu):
        # arm k scores x @ beta with x = e_0
        for k, (mr, mw) in enumerate(zip(random_mu, whole_mu)):
            policy.arms[k].beta_random[:] = 0
            policy.arms[k].beta_random[0] = mr
            policy.arms[k].beta_whole[:] = 0
            policy.arms[k].beta_whole[0] = mw

    def _greedy_select(self, policy, x):
        # t large and t0 tiny make a random draw essentially impossible; check anyway
        rng = np.random.default_rng(0)
        dec = policy.select(x, 10**9, rng)
        assert not dec.was_random
        return dec

    def test_singleton_candidate_set(self):
        p = _gmcp(t0=1e-6, h=0.5)
        self._force(p, (1.0, 0.3), (0.0, 5.0))
        x = np.eye(5)[0]
        dec = self._greedy_select(p, x)
        assert dec.arm == 0 and dec.candidate_set == (0,)
        assert p.whole_reads == 0

    def test_whole_sample_breaks_tie(self):
        p = _gmcp(t0=1e-6, h=0.5)
        self._force(p, (1.0, 0.9), (0.8, 0.95))
        dec = self._greedy_select(p, np.eye(5)[0])
        assert dec.candidate_set == (0, 1) and dec.arm == 1
        assert p.whole_reads == 1

    def test_cold_start_tie_breaks_to_lowest(self):
        p = _gmcp(K=4, t0=1e-6)
        dec = self._greedy_select(p, np.ones(5))
        assert dec.candidate_set == (0, 1, 2, 3) and dec.arm == 0

    def test_candidate_set_definition(self):
        rng = np.random.default_rng(3)
        for _ in range(200):
            K = int(rng.integers(2, 8))
            h = float(rng.uniform(0.01, 3))
            p = _gmcp(K=K, d=3, t0=1e-6, h=h)
            for st in p.arms:
                st.beta_random[:] = rng.standard_normal(3)
                st.beta_whole[:] = rng.standard_normal(3)
            x = rng.standard_normal(3)
            before = p.whole_reads
            dec = p.select(x, 10**9, rng)
            p._pending = None
            mu = np.array([x @ st.beta_random for st in p.arms])
            top = mu.max()
            for k in range(K):
                if k in dec.candidate_set:
                    assert mu[k] >= top - h / 2 - 1e-12
                else:
                    assert mu[k] < top - h / 2 + 1e-12
            assert dec.arm in dec.candidate_set
            if len(dec.candidate_set) == 1:
                assert p.whole_reads == before

    def test_logistic_family_scores(self):
        p = _gmcp(family=LogisticBinary(5.0), t0=1e-6, h=0.1)
        self._force(p, (0.0, 2.0), (0.0, 0.0))
        assert self._greedy_select(p, np.eye(5)[0]).arm == 1


class TestUpdate:
    def test_random_branch_grows_both(self):
        p = _gmcp()
        x = np.ones(5)
        p.select(x, 1, np.random.default_rng(0))
        p.update(Decision(1, True), x, 2.0, 1)
        assert len(p.arms[1].random_set) == 1 and len(p.arms[1].whole_set) == 1

    def test_greedy_branch_grows_whole_only(self):
        p = _gmcp()
        x = np.ones(5)
        p.select(x, 1, np.random.default_rng(0))
        p.update(Decision(0, False, (0,)), x, 2.0, 1)
        assert len(p.arms[0].random_set) == 0 and len(p.arms[0].whole_set) == 1

    def test_select_update_alternation_enforced(self):
        p = _gmcp()
        x = np.ones(5)
        rng = np.random.default_rng(0)
        d = p.select(x, 1, rng)
        with pytest.raises(RuntimeError):
            p.select(x, 2, rng)
        with pytest.raises(RuntimeError):
            p.update(d, x, 0.0, 3)

    def test_subset_invariant_over_run(self):
        env = make_study1(20)
        p = _gmcp(d=20, t0=10)
        rng = np.random.default_rng(7)
        for t in range(1, 301):
            x = env.next_context(rng)
            dec = p.select(x, t, rng)
            p.update(dec, x, env.realize_reward(dec.arm, x, rng), t)
            for st in p.arms:
                R = {tuple(row) for row in st.random_set.X}
                W = {tuple(row) for row in st.whole_set.X}
                assert R <= W
        assert sum(len(st.whole_set) for st in p.arms) == 300

    def test_estimates_move_after_enough_data(self):
        env = make_study1(10)
        p = _gmcp(d=10, t0=10, fidelity=True)
        rng = np.random.default_rng(1)
        for t in range(1, 201):
            x = env.next_context(rng)
            dec = p.select(x, t, rng)
            p.update(dec, x, env.realize_reward(dec.arm, x, rng), t)
        for k, st in enumerate(p.arms):
            assert np.linalg.norm(st.beta_whole - env.true_betas[k]) < 1.0

    def test_solver_failure_keeps_previous(self, monkeypatch):
        p = _gmcp()
        p.arms[0].beta_whole[:] = 0.5

        def boom(*a, **k):
            raise ValueError("synthetic failure")

        monkeypatch.setattr(p, "_estimate", boom)
        x = np.ones(5)
        for t in (1, 2):
            p.select(x, t, np.random.default_rng(t))
            p.update(Decision(0, False, (0,)), x, 1.0, t)
        assert np.all(p.arms[0].beta_whole == 0.5)
        assert p.solver_failures == 1


class TestBaselines:
    def test_random_policy_uniform(self):
        rng = np.random.default_rng(0)
        pol = RandomPolicy(4)
        counts = np.bincount([pol.select(None, 1, rng).arm for _ in range(8000)], minlength=4)
        assert np.all(np.abs(counts / 8000 - 0.25) < 0.02)

    def test_oracle_policy_is_best(self):
        env = make_study1(10)
        pol = OraclePolicy(env)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = env.next_context(rng)
            assert pol.select(x, 1, rng).arm == env.best_arm(x)

    def test_oful_rejects_logistic(self):
        with pytest.raises(ValueError):
            Oful(2, 3, LogisticBinary(1.0))

    def test_ols_inverse_tracks_direct_solve(self):
        cfg = GmcpConfig(K=2, d=4, t0=1000.0, fidelity=True)
        pol = OlsBandit(cfg, ridge=0.5)
        rng = np.random.default_rng(2)
        for t in range(1, 41):
            x = rng.standard_normal(4)
            dec = pol.select(x, t, rng)
            pol.update(dec, x, float(x.sum() + rng.standard_normal()), t)
        st = pol.arms[0]
        X, r = st.whole_set.X, st.whole_set.r
        direct = np.linalg.solve(X.T @ X + 0.5 * np.eye(4), X.T @ r)
        np.testing.assert_allclose(st.beta_whole, direct, atol=1e-10)

    def test_oful_learns(self):
        env = make_study1(5)
        pol = Oful(2, 5, LinearGaussian(1.0), width=0.5)
        rng = np.random.default_rng(3)
        regret = 0.0
        for t in range(1, 501):
            x = env.next_context(rng)
            dec = pol.select(x, t, rng)
            mu = env.expected_rewards(x)
            regret += mu.max() - mu[dec.arm]
            pol.update(dec, x, env.realize_reward(dec.arm, x, rng), t)
        assert regret < 0.5 * 500 * 0.37  # well below random play

    def test_lasso_bandit_runs(self):
        env = make_study1(10)
        pol = LassoBandit(GmcpConfig(K=2, d=10))
        rng = np.random.default_rng(4)
        for t in range(1, 101):
            x = env.next_context(rng)
            dec = pol.select(x, t, rng)
            pol.update(dec, x, env.realize_reward(dec.arm, x, rng), t)
        assert np.count_nonzero(pol.arms[1].beta_whole) >= 3


def test_config_validation():
    with pytest.raises(ValueError):
        GmcpConfig(K=1, d=3)
    with pytest.raises(ValueError):
        GmcpConfig(K=2, d=3, h=0.0)
