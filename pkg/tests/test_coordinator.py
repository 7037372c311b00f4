import math

import numpy as np
import pytest

from distucrl import coordinator as coordinator_module
from distucrl.baselines import mod_ucrl2_run
from distucrl.confidence import VisitationCounts, build_plausible_set
from distucrl.coordinator import (
    Coordinator,
    SyncLedger,
    epoch_bound,
    epoch_bound_tight,
    sequential_epoch_bound,
    synchronize,
)
from distucrl.environments import make_riverswim
from distucrl.errors import ContractViolation
from distucrl.evi import extended_value_iteration
from distucrl.mdp_core import Policy
from distucrl.simulation import run_dist_ucrl


def random_counts(rng, S=6, A=2):
    c = rng.integers(0, 20, size=(S, A, S))
    return VisitationCounts(c, rng.random((S, A)) * c.sum(axis=2))


class TestSynchronize:
    def test_cold_start(self):
        policy, n, result = synchronize([VisitationCounts.zeros(6, 2)] * 3, 1, 3)
        assert not n.any()
        assert result.converged
        policy.validate(6, 2)

    def test_epsilon_passed_exactly(self, monkeypatch):
        seen = []

        def spy(plausible, epsilon, max_iters=1_000_000):
            seen.append(epsilon)
            return extended_value_iteration(plausible, epsilon, max_iters)

        monkeypatch.setattr(coordinator_module, "extended_value_iteration", spy)
        coord = Coordinator(6, 2, 4)
        coord.synchronize([VisitationCounts.zeros(6, 2)] * 4, 37)
        assert seen == [1.0 / math.sqrt(4 * 37)]

    def test_override_epsilon(self):
        assert Coordinator(6, 2, 4, epsilon_override=0.3).epsilon(100) == 0.3

    def test_matches_direct_construction(self):
        rng = np.random.default_rng(0)
        parts = [random_counts(rng) for _ in range(3)]
        policy, n, result = synchronize(parts, 50, 3)
        total = VisitationCounts(sum(p.transition_counts for p in parts), sum(p.reward_sums for p in parts))
        direct = extended_value_iteration(build_plausible_set(total, 50, 3), 1 / math.sqrt(150))
        assert policy == direct.policy
        assert np.array_equal(result.utilities, direct.utilities)
        assert np.array_equal(n, total.visit_counts)

    def test_deterministic(self):
        parts = [random_counts(np.random.default_rng(1)) for _ in range(2)]
        a, b = synchronize(parts, 9, 2), synchronize([p.copy() for p in parts], 9, 2)
        assert a[0] == b[0] and np.array_equal(a[1], b[1])

    def test_nonconvergence_is_fatal(self):
        m = make_riverswim(12)
        counts = VisitationCounts(np.rint(m.transition * 10**6).astype(np.int64), m.mean_reward * 10**6)
        with pytest.raises(coordinator_module.NumericalFailure) as info:
            synchronize([counts], 5, 1, epsilon=1e-12, max_evi_iters=3)
        assert info.value.last_span > 0

    def test_wrong_agent_count(self):
        with pytest.raises(ContractViolation):
            Coordinator(6, 2, 3).synchronize([VisitationCounts.zeros(6, 2)], 1)


class TestLedger:
    def test_rounds_track_epoch_starts(self):
        coord = Coordinator(3, 2, 1)
        for t in (1, 2, 5):
            coord.synchronize([VisitationCounts.zeros(3, 2)], t)
        assert coord.ledger.rounds == 3 and coord.ledger.epoch_starts == [1, 2, 5]

    def test_rejects_non_increasing_start(self):
        led = SyncLedger()
        led.record(3, np.zeros((1, 1)), Policy([0]))
        with pytest.raises(ContractViolation):
            led.record(3, np.zeros((1, 1)), Policy([0]))

    def test_dict_roundtrip(self):
        led = run_dist_ucrl(make_riverswim(6), 2, 300, seed=0).ledger
        again = SyncLedger.from_dict(led.to_dict())
        assert again.to_dict() == led.to_dict()


class TestEpochBound:
    def test_minimal(self):
        assert epoch_bound(1, 1, 1, 1) == 3

    def test_riverswim_value(self):
        assert epoch_bound(4, 6, 2, 10**5) == 991

    @pytest.mark.parametrize("axis", range(4))
    def test_monotone(self, axis):
        base = [4, 6, 2, 1000]
        values = []
        for k in range(1, 6):
            args = list(base)
            args[axis] *= k
            values.append(epoch_bound(*args))
        assert values == sorted(values)

    def test_requires_horizon(self):
        with pytest.raises(ContractViolation):
            epoch_bound(1, 6, 2, 11)

    def test_tight_is_smaller(self):
        assert epoch_bound_tight(4, 6, 2, 10**5) < epoch_bound(4, 6, 2, 10**5)

    def test_sequential_bound(self):
        assert sequential_epoch_bound(1, 1, 1, 1) == 2.0
        assert sequential_epoch_bound(4, 6, 2, 3) == pytest.approx(13.0)


def test_single_agent_matches_round_robin_baseline():
    m = make_riverswim(6)
    dist = run_dist_ucrl(m, 1, 3000, seed=5)
    seq = mod_ucrl2_run(m, 1, 3000, seed=5)
    assert np.array_equal(dist.states, seq.states)
    assert np.array_equal(dist.actions, seq.actions)
    assert np.array_equal(dist.rewards, seq.rewards)
    assert dist.ledger.epoch_starts == seq.ledger.epoch_starts
    assert all(np.array_equal(a, b) for a, b in zip(dist.ledger.policies, seq.ledger.policies))
    assert all(np.array_equal(a, b) for a, b in zip(dist.ledger.n_snapshots, seq.ledger.n_snapshots))


def test_agents_share_policy_between_barriers():
    tr = run_dist_ucrl(make_riverswim(6), 4, 1500, seed=9)
    starts = tr.ledger.epoch_starts + [tr.T + 1]
    for k, pol in enumerate(tr.ledger.policies):
        sl = slice(starts[k] - 1, starts[k + 1] - 1)
        assert np.array_equal(tr.actions[sl], pol[tr.states[sl]])
