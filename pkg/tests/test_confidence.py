import math

import numpy as np
import pytest

from distucrl.confidence import (
    VisitationCounts,
    aggregate,
    build_plausible_set,
    reward_radius,
    transition_radius,
)
from distucrl.errors import ContractViolation


def random_counts(rng, S=3, A=2, high=5):
    c = rng.integers(0, high, size=(S, A, S))
    r = rng.random((S, A)) * c.sum(axis=2)
    return VisitationCounts(c, r)


class TestAggregate:
    def test_two_agents_one_cell(self):
        a, b = VisitationCounts.zeros(2, 1), VisitationCounts.zeros(2, 1)
        a.transition_counts[0, 0, 1] = 3
        b.transition_counts[0, 0, 1] = 5
        assert aggregate([a, b]).transition_counts[0, 0, 1] == 8

    def test_single_agent_identity(self):
        c = random_counts(np.random.default_rng(0))
        assert aggregate([c]) == c

    def test_matches_elementwise_sum(self):
        rng = np.random.default_rng(1)
        parts = [random_counts(rng) for _ in range(4)]
        expected_c = np.zeros((3, 2, 3), dtype=np.int64)
        expected_r = np.zeros((3, 2))
        for p in parts:
            for idx in np.ndindex(expected_c.shape):
                expected_c[idx] += p.transition_counts[idx]
            for idx in np.ndindex(expected_r.shape):
                expected_r[idx] += p.reward_sums[idx]
        total = aggregate(parts)
        assert np.array_equal(total.transition_counts, expected_c)
        assert np.allclose(total.reward_sums, expected_r, rtol=0, atol=1e-12)

    def test_commutative_and_associative(self):
        rng = np.random.default_rng(2)
        a, b, c = (random_counts(rng) for _ in range(3))
        assert aggregate([a, b, c]).transition_counts.tolist() == aggregate([c, a, b]).transition_counts.tolist()
        left, right = aggregate([aggregate([a, b]), c]), aggregate([a, aggregate([b, c])])
        assert np.array_equal(left.transition_counts, right.transition_counts)
        assert np.allclose(left.reward_sums, right.reward_sums, rtol=0, atol=1e-12)

    def test_dimension_mismatch(self):
        with pytest.raises(ContractViolation):
            aggregate([VisitationCounts.zeros(2, 1), VisitationCounts.zeros(3, 1)])

    def test_empty(self):
        with pytest.raises(ContractViolation):
            aggregate([])

    def test_negative_counts_rejected(self):
        c = np.zeros((2, 1, 2), dtype=np.int64)
        c[0, 0, 0] = -1
        with pytest.raises(ContractViolation):
            VisitationCounts(c, np.zeros((2, 1)))


class TestRadii:
    def test_reward_radius_value(self):
        assert reward_radius(1, 1, 1, 6, 2) == pytest.approx(3.3351, abs=5e-5)
        assert reward_radius(1, 1, 1, 6, 2) == math.sqrt(7 * math.log(24) / 2)

    def test_transition_radius_value(self):
        # the quoted 10.790 is the closed form 10.7911... truncated, so compare at 4 significant figures
        assert transition_radius(1, 1, 1, 6, 2) == math.sqrt(84 * math.log(4))
        assert transition_radius(1, 1, 1, 6, 2) == pytest.approx(10.79, abs=5e-3)

    @pytest.mark.parametrize("fn", [reward_radius, transition_radius])
    def test_floor(self, fn):
        assert fn(0, 7, 3, 6, 2) == fn(1, 7, 3, 6, 2)

    @pytest.mark.parametrize("fn", [reward_radius, transition_radius])
    def test_strictly_decreasing(self, fn):
        vals = fn(np.arange(1, 200), 50, 2, 6, 2)
        assert np.all(np.diff(vals) < 0)

    def test_transition_scales_with_sqrt_s(self):
        assert transition_radius(9, 10, 2, 12, 2) / transition_radius(9, 10, 2, 3, 2) == pytest.approx(2.0, rel=1e-12)

    @pytest.mark.parametrize("fn", [reward_radius, transition_radius])
    def test_t_below_one(self, fn):
        with pytest.raises(ContractViolation):
            fn(1, 0, 1, 2, 2)


class TestPlausibleSet:
    def test_cold_start(self):
        ps = build_plausible_set(VisitationCounts.zeros(4, 2), 1, 1)
        assert np.all(ps.p_hat == 0.25)
        assert np.all(ps.r_hat == 0)
        assert np.all(ps.d == transition_radius(0, 1, 1, 4, 2))
        assert np.all(ps.r_tilde == reward_radius(0, 1, 1, 4, 2))

    def test_single_sample(self):
        c = VisitationCounts.zeros(3, 2)
        c.record(1, 0, 2, 1.0)
        ps = build_plausible_set(c, 2, 1)
        assert ps.p_hat[1, 0].tolist() == [0.0, 0.0, 1.0]
        assert ps.r_hat[1, 0] == 1.0

    def test_invariants(self):
        ps = build_plausible_set(random_counts(np.random.default_rng(3), S=5), 40, 3)
        assert np.max(np.abs(ps.p_hat.sum(axis=2) - 1)) <= 1e-12
        assert np.all(ps.d > 0)
        assert np.all(ps.r_tilde >= ps.r_hat)

    def test_unclipped_by_default(self):
        ps = build_plausible_set(VisitationCounts.zeros(2, 2), 1, 1)
        assert ps.r_tilde.max() > 1.0
        assert build_plausible_set(VisitationCounts.zeros(2, 2), 1, 1, clip_rewards=True).r_tilde.max() == 1.0

    def test_pure(self):
        c = random_counts(np.random.default_rng(4))
        a, b = build_plausible_set(c, 9, 2), build_plausible_set(c.copy(), 9, 2)
        for name in ("p_hat", "r_hat", "r_tilde", "d"):
            assert np.array_equal(getattr(a, name), getattr(b, name))

    def test_radius_covers_1000_samples(self):
        rng = np.random.default_rng(5)
        p = np.array([0.05, 0.1, 0.15, 0.2, 0.2, 0.3])
        rad = transition_radius(1000, 1, 1, 6, 2)
        hits = 0
        for _ in range(1000):
            p_hat = rng.multinomial(1000, p) / 1000
            hits += np.abs(p_hat - p).sum() < rad
        assert hits >= 990

    def test_contains_true_model_with_honest_samples(self):
        from distucrl.environments import make_riverswim
        m = make_riverswim(6)
        rng = np.random.default_rng(6)
        c = VisitationCounts.zeros(6, 2)
        c.transition_counts[:] = np.array([[rng.multinomial(500, m.transition[s, a]) for a in range(2)]
                                           for s in range(6)])
        c.reward_sums[:] = rng.binomial(500, m.mean_reward)
        assert build_plausible_set(c, 6000, 1).contains(m.transition, m.mean_reward)


@pytest.mark.parametrize("n", [10, 100])
def test_l1_concentration_monte_carlo(n):
    """Empirical P(||p_hat - p||_1 >= eps) stays below 2^S exp(-n eps^2 / 2) plus 3 sigma."""
    S, trials = 3, 20_000
    p = np.array([0.5, 0.3, 0.2])
    rng = np.random.default_rng(100 + n)
    dev = np.abs(rng.multinomial(n, p, size=trials) / n - p).sum(axis=1)
    for eps in np.linspace(0.05, 1.0, 20):
        freq = np.mean(dev >= eps)
        bound = min(1.0, 2**S * math.exp(-n * eps**2 / 2))
        slack = 3 * math.sqrt(max(bound * (1 - bound), 1e-12) / trials)
        assert freq <= bound + slack, (eps, freq, bound)
