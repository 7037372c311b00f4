import numpy as np
import pytest

from distucrl.environments import make_env, make_gridworld_4room, make_riverswim
from distucrl.errors import ContractViolation, DivergedError
from distucrl.mdp_core import MdpModel, Policy, diameter, optimal_gain, step
from distucrl.rng import DrawStream, make_generator

from oracles import enumerate_diameter, enumerate_optimal_gain

# frozen from the policy-enumeration oracles in tests/oracles.py
RIVERSWIM6_GAIN = 0.8006589785831968
RIVERSWIM6_DIAMETER = 22.510288065843607


def flip_mdp():
    p = np.zeros((2, 1, 2))
    p[0, 0, 1] = p[1, 0, 0] = 1.0
    return MdpModel(p, np.array([[0.0], [1.0]]), reward_noise="deterministic")


def cycle3():
    p = np.zeros((3, 1, 3))
    for s in range(3):
        p[s, 0, (s + 1) % 3] = 1.0
    return MdpModel(p, np.zeros((3, 1)))


class TestConstruction:
    def test_rows_must_sum_to_one(self):
        p = np.full((2, 1, 2), 0.5)
        p[0, 0] = [0.5, 0.5 + 1e-9]
        with pytest.raises(ContractViolation):
            MdpModel(p, np.zeros((2, 1)))

    @pytest.mark.parametrize("bad", [-0.1, 1.1])
    def test_reward_range(self, bad):
        with pytest.raises(ContractViolation):
            MdpModel(np.ones((1, 1, 1)), np.array([[bad]]))

    def test_negative_probability(self):
        p = np.array([[[1.5, -0.5]], [[0.0, 1.0]]])
        with pytest.raises(ContractViolation):
            MdpModel(p, np.zeros((2, 1)))

    def test_immutable(self):
        m = flip_mdp()
        with pytest.raises(ValueError):
            m.transition[0, 0, 0] = 1.0


class TestStep:
    def test_flip_always_moves(self):
        m = flip_mdp()
        rng = DrawStream(make_generator(0, 0, "t"))
        for _ in range(100):
            assert step(m, 0, 0, rng)[0] == 1

    def test_identity_transition_deterministic_reward(self):
        m = MdpModel(np.array([[[1.0, 0.0]], [[0.0, 1.0]]]), np.array([[0.3], [0.0]]), reward_noise="deterministic")
        rng = DrawStream(make_generator(1, 0, "t"))
        assert step(m, 0, 0, rng) == (0, 0.3)

    def test_two_draws_per_step(self):
        m = make_riverswim(6)
        rng = DrawStream(make_generator(2, 0, "t"))
        for k in range(1, 11):
            step(m, 3, 1, rng)
            assert rng.drawn == 2 * k

    def test_replay_reproducible(self):
        m = make_riverswim(6)
        a = DrawStream(make_generator(7, 3, "env"))
        b = DrawStream(make_generator(7, 3, "env"))
        assert [step(m, 0, 1, a) for _ in range(500)] == [step(m, 0, 1, b) for _ in range(500)]

    def test_riverswim_frequencies_within_three_sigma(self):
        m = make_riverswim(6)
        rng = DrawStream(make_generator(11, 0, "freq"))
        n = 100_000
        hits = np.bincount([step(m, 0, 1, rng)[0] for _ in range(n)], minlength=6)
        p = m.transition[0, 1]
        sigma = np.sqrt(n * p * (1 - p))
        assert np.all(np.abs(hits - n * p) <= 3 * sigma + 1e-9)

    def test_bernoulli_reward_mean(self):
        m = MdpModel(np.ones((1, 1, 1)), np.array([[0.25]]))
        rng = DrawStream(make_generator(5, 0, "r"))
        n = 40_000
        mean = np.mean([step(m, 0, 0, rng)[1] for _ in range(n)])
        assert abs(mean - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / n)

    @pytest.mark.parametrize("s,a", [(6, 0), (0, 2), (-1, 0)])
    def test_out_of_range(self, s, a):
        with pytest.raises(ContractViolation):
            step(make_riverswim(6), s, a, DrawStream(make_generator(0, 0, "x")))

    def test_zero_mass_state_never_sampled(self):
        p = np.zeros((3, 1, 3))
        p[:, 0, 0] = 0.5
        p[:, 0, 1] = 0.5
        m = MdpModel(p, np.zeros((3, 1)))
        rng = DrawStream(make_generator(3, 0, "z"))
        assert {step(m, 0, 0, rng)[0] for _ in range(5000)} == {0, 1}


class TestOptimalGain:
    def test_constant_reward(self):
        p = make_riverswim(6).transition
        g = optimal_gain(MdpModel(p, np.full((6, 2), 0.37)))
        assert abs(g.gain - 0.37) <= 1e-8

    def test_single_state(self):
        g = optimal_gain(MdpModel(np.ones((1, 2, 1)), np.array([[0.2, 0.8]])))
        assert abs(g.gain - 0.8) <= 1e-8
        assert g.policy.action_of.tolist() == [1]

    def test_periodic_chain(self):
        assert abs(optimal_gain(flip_mdp()).gain - 0.5) <= 1e-8

    def test_riverswim6_matches_enumeration(self):
        m = make_riverswim(6)
        assert abs(enumerate_optimal_gain(m.transition, m.mean_reward) - RIVERSWIM6_GAIN) < 1e-12
        assert abs(optimal_gain(m, tol=1e-9).gain - RIVERSWIM6_GAIN) <= 1e-6

    @pytest.mark.parametrize("name", ["riverswim6", "riverswim12", "gridworld4room"])
    def test_start_state_invariance(self, name):
        m = make_env(name)
        gains = [optimal_gain(m, tol=1e-8, ref_state=s).gain for s in range(0, m.n_states, 3)]
        assert max(gains) - min(gains) <= 1e-8

    @pytest.mark.parametrize("name", ["riverswim6", "riverswim12", "gridworld4room"])
    def test_bellman_relation(self, name):
        m = make_env(name)
        g = optimal_gain(m, tol=1e-9)
        rhs = (m.mean_reward + m.transition @ g.bias).max(axis=1)
        assert np.max(np.abs(g.gain + g.bias - rhs)) <= 1e-6
        assert g.bias.min() == 0.0

    @pytest.mark.parametrize("name", ["riverswim6", "riverswim12", "gridworld4room"])
    def test_bias_span_bounded_by_diameter(self, name):
        m = make_env(name)
        assert optimal_gain(m, tol=1e-9).bias_span <= diameter(m) + 1e-6

    def test_nonconvergence_raises(self):
        with pytest.raises(DivergedError) as info:
            optimal_gain(make_riverswim(12), tol=1e-12, max_iters=3)
        assert info.value.last_span > 0


class TestDiameter:
    def test_flip(self):
        assert diameter(flip_mdp()) == pytest.approx(1.0, abs=1e-9)

    def test_cycle(self):
        assert diameter(cycle3()) == pytest.approx(2.0, abs=1e-9)

    def test_riverswim6_matches_enumeration(self):
        m = make_riverswim(6)
        assert enumerate_diameter(m.transition) == pytest.approx(RIVERSWIM6_DIAMETER, abs=1e-9)
        assert abs(diameter(m, tol=1e-6) - RIVERSWIM6_DIAMETER) <= 1e-4

    @pytest.mark.parametrize("name", ["riverswim6", "riverswim12", "gridworld4room"])
    def test_at_least_one(self, name):
        assert diameter(make_env(name)) >= 1.0

    def test_unreachable_state_diverges(self):
        p = np.zeros((2, 1, 2))
        p[0, 0, 0] = p[1, 0, 1] = 1.0
        with pytest.raises(DivergedError):
            diameter(MdpModel(p, np.zeros((2, 1))))

    def test_grid_slip_zero(self):
        assert diameter(make_gridworld_4room(slip=0.0)) == pytest.approx(8.0, abs=1e-9)


def test_policy_equality_and_validation():
    a = Policy([0, 1, 1])
    assert a == Policy(np.array([0, 1, 1]))
    assert hash(a) == hash(Policy([0, 1, 1]))
    with pytest.raises(ContractViolation):
        a.validate(3, 1)
    with pytest.raises(ContractViolation):
        Policy([-1])
