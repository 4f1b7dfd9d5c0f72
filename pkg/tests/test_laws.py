import math

import numpy as np
import pytest

from covertq.errors import ParameterError, StructuralError, UnsupportedLawError
from covertq.laws import (
    conditional_log_density,
    conditional_log_density_batch,
    info_density_sample,
    poisson_log_density,
    sample_info_densities,
)
from covertq.queueing import (
    QueueParams,
    ServiceModel,
    TimeSequence,
    poisson_arrivals,
    push_through_queue,
    simulate_channel,
)

EXP1 = ServiceModel.exponential(1.0)


class TestConditionalLogDensity:
    def test_hand_example(self):
        # services (0.5, 2.0) at rate 1: total = 2*log(1) - 2.5
        a = TimeSequence([1.0, 1.0])
        d = TimeSequence([1.5, 2.5])
        assert conditional_log_density(a, d, EXP1) == pytest.approx(-2.5, abs=1e-12)

    def test_departure_before_arrival_is_infeasible(self):
        a = TimeSequence([1.0, 1.0])
        d = TimeSequence([0.5, 0.1])  # second departure epoch 0.6 < arrival epoch 2
        assert conditional_log_density(a, d, EXP1) == -math.inf

    def test_round_trip_recovers_true_services(self):
        # gap->epoch conversion costs a few ulps, nothing more
        rng = np.random.default_rng(21)
        for _ in range(100):
            n = int(rng.integers(1, 300))
            a = TimeSequence(rng.exponential(2.0, n))
            s = TimeSequence(rng.exponential(1.0, n))
            dep, _ = push_through_queue(a, s)
            got = conditional_log_density(a, dep, EXP1)
            want = float(np.sum(math.log(1.0) - 1.0 * s.values))
            assert got == pytest.approx(want, rel=1e-10, abs=1e-10)

    def test_length_mismatch(self):
        with pytest.raises(StructuralError):
            conditional_log_density(TimeSequence([1.0]), TimeSequence([1.0, 2.0]), EXP1)

    def test_deterministic_law_rejected(self):
        a = TimeSequence([1.0])
        with pytest.raises(UnsupportedLawError):
            conditional_log_density(a, TimeSequence([1.5]), ServiceModel.deterministic(2.0))

    def test_erlang_law_value(self):
        # single packet, idle start: s = D - A; Erlang-2 density at s
        model = ServiceModel.erlang(1.0, shape=2)
        a = TimeSequence([1.0])
        d = TimeSequence([1.7])
        s = 0.7
        want = math.log(4.0) + math.log(s) - 2.0 * s  # k=2, stage rate 2
        assert conditional_log_density(a, d, model) == pytest.approx(want, abs=1e-12)

    def test_feasibility_monotone_in_first_departure(self):
        rng = np.random.default_rng(22)
        for _ in range(50):
            a = TimeSequence(rng.exponential(2.0, 20))
            s = TimeSequence(rng.exponential(1.0, 20))
            dep, _ = push_through_queue(a, s)
            assert np.isfinite(conditional_log_density(a, dep, EXP1))
            shifted = dep.values.copy()
            shifted[0] += rng.uniform(0.01, 5.0)
            assert np.isfinite(conditional_log_density(a, TimeSequence(shifted), EXP1))


class TestBatchScan:
    def test_agrees_with_scalar_version(self):
        rng = np.random.default_rng(23)
        n, count = 40, 64
        gaps = rng.exponential(2.0, (count, n))
        epochs = np.ascontiguousarray(np.cumsum(gaps, axis=1).T)
        a = poisson_arrivals(0.5, n, rng)
        dep = simulate_channel(a, QueueParams(EXP1), rng)
        batch = conditional_log_density_batch(epochs, dep, EXP1)
        for c in range(0, count, 7):
            scalar = conditional_log_density(TimeSequence(gaps[c]), dep, EXP1)
            assert batch[c] == pytest.approx(scalar, rel=1e-12, abs=1e-12)

    def test_agrees_for_nonexponential_law(self):
        rng = np.random.default_rng(24)
        model = ServiceModel.erlang(1.0, shape=2)
        n, count = 30, 16
        gaps = rng.exponential(2.0, (count, n))
        epochs = np.ascontiguousarray(np.cumsum(gaps, axis=1).T)
        a = poisson_arrivals(0.5, n, rng)
        dep = simulate_channel(a, QueueParams(model), rng)
        batch = conditional_log_density_batch(epochs, dep, model)
        for c in range(count):
            scalar = conditional_log_density(TimeSequence(gaps[c]), dep, model)
            if math.isinf(scalar):
                assert batch[c] == -math.inf
            else:
                assert batch[c] == pytest.approx(scalar, rel=1e-12, abs=1e-12)

    def test_shape_validation(self):
        with pytest.raises(StructuralError):
            conditional_log_density_batch(np.ones(5), TimeSequence([1.0]), EXP1)
        with pytest.raises(StructuralError):
            conditional_log_density_batch(np.ones((3, 4)), TimeSequence([1.0, 1.0]), EXP1)


class TestPoissonLogDensity:
    def test_unit_example(self):
        assert poisson_log_density(TimeSequence([1.0, 1.0]), 1.0) == pytest.approx(-2.0, abs=1e-12)

    def test_single_gap_example(self):
        want = math.log(0.5) - 1.0
        assert poisson_log_density(TimeSequence([2.0]), 0.5) == pytest.approx(want, abs=1e-12)

    def test_rate_validation(self):
        with pytest.raises(ParameterError):
            poisson_log_density(TimeSequence([1.0]), 0.0)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(25)
        x = rng.exponential(1.0, 200)
        base = poisson_log_density(TimeSequence(x), 0.7)
        for _ in range(5):
            shuffled = rng.permutation(x)
            assert poisson_log_density(TimeSequence(shuffled), 0.7) == pytest.approx(
                base, rel=1e-12
            )

    def test_matches_differential_entropy(self):
        # -E[log q]/n -> 1 - log(rate) for Exp(rate) draws
        rng = np.random.default_rng(26)
        x = TimeSequence(rng.exponential(2.0, 100_000))
        per_gap = -poisson_log_density(x, 0.5) / 100_000
        assert per_gap == pytest.approx(1.0 - math.log(0.5), rel=0.01)


class TestInfoDensity:
    def test_channel_output_is_feasible(self):
        rng = np.random.default_rng(27)
        a = poisson_arrivals(0.5, 100, rng)
        dep = simulate_channel(a, QueueParams(EXP1), rng)
        sample = info_density_sample(a, dep, EXP1, 0.5)
        assert sample.feasible and sample.n == 100
        assert math.isfinite(sample.per_packet_value)

    def test_infeasible_block_flags_and_pins_value(self):
        a = TimeSequence([1.0, 1.0])
        d = TimeSequence([0.5, 0.1])
        sample = info_density_sample(a, d, EXP1, 0.5)
        assert not sample.feasible
        assert sample.per_packet_value == -math.inf

    def test_mean_approaches_log_rate_ratio(self):
        # per-packet mean -> log(mu1 / lam) as n grows
        rng = np.random.default_rng(28)
        values = sample_info_densities(500, 0.5, EXP1, 150, rng)
        assert np.all(np.isfinite(values))
        assert values.mean() == pytest.approx(math.log(2.0), rel=0.15)

    def test_trials_validation(self):
        with pytest.raises(ParameterError):
            sample_info_densities(10, 0.5, EXP1, 0, np.random.default_rng(0))
