import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from covertq.errors import (
    InfeasibleRateError,
    InstabilityError,
    ParameterError,
    UnsupportedLawError,
)
from covertq.queueing import ServiceModel
from covertq.rates import (
    RatePoint,
    RegionKind,
    RegionSpec,
    choose_dummy_rate,
    covert_capacity,
    in_region,
    kl_to_exponential,
    min_key_rate_mm1,
    no_key_needed,
)

from oracles import (
    erlang_kl_closed_form,
    kl_by_monte_carlo,
    kl_by_quadrature,
    uniform_kl_closed_form,
)


def mm1_spec(mu1=1.0, mu2=2.0):
    return RegionSpec(mu1=mu1, mu2=mu2)


class TestCovertCapacity:
    def test_reference_value(self):
        assert covert_capacity(0.5, 1.0) == pytest.approx(0.5 * math.log(2.0), abs=1e-12)

    def test_argmax_over_arrival_rate(self):
        # d/dlam [lam ln(mu/lam)] = 0 at lam = mu/e, where the value is mu/e
        mu = 1.0
        lam_star = mu / math.e
        assert covert_capacity(lam_star, mu) == pytest.approx(mu / math.e, abs=1e-12)
        numeric = minimize_scalar(
            lambda lam: -covert_capacity(lam, mu), bounds=(1e-6, mu - 1e-6), method="bounded"
        )
        assert numeric.x == pytest.approx(lam_star, abs=1e-5)
        assert -numeric.fun <= covert_capacity(lam_star, mu) + 1e-12

    def test_vanishes_at_stability_boundary(self):
        assert covert_capacity(1.0 - 1e-9, 1.0) == pytest.approx(0.0, abs=1e-8)

    def test_instability_raises(self):
        with pytest.raises(InstabilityError):
            covert_capacity(1.0, 1.0)
        with pytest.raises(InstabilityError):
            covert_capacity(1.5, 1.0)
        with pytest.raises(ParameterError):
            covert_capacity(-0.5, 1.0)


class TestMinKeyRate:
    def test_reference_value(self):
        assert min_key_rate_mm1(0.5, 1.0, 2.0) == pytest.approx(0.5 * math.log(2.0), abs=1e-12)

    def test_zero_when_adversary_is_slower(self):
        assert min_key_rate_mm1(0.5, 2.0, 1.0) == 0.0
        assert min_key_rate_mm1(0.5, 1.0, 1.0) == 0.0

    def test_monotone_in_adversary_rate(self):
        values = [min_key_rate_mm1(0.5, 1.0, mu2) for mu2 in (1.0, 1.5, 2.0, 4.0)]
        assert values == sorted(values)

    def test_instability_raises(self):
        with pytest.raises(InstabilityError):
            min_key_rate_mm1(1.0, 1.0, 2.0)
        with pytest.raises(InstabilityError):
            min_key_rate_mm1(0.8, 1.0, 0.5)


class TestKlToExponential:
    def test_same_exponential_is_zero(self):
        assert kl_to_exponential(ServiceModel.exponential(2.0), 2.0) == 0.0

    def test_exponential_closed_form(self):
        # D(Exp(a) || Exp(b)) = ln(a/b) + b/a - 1
        got = kl_to_exponential(ServiceModel.exponential(3.0), 1.5)
        assert got == pytest.approx(math.log(2.0) + 0.5 - 1.0, abs=1e-12)

    def test_erlang_against_quadrature_oracle(self):
        model = ServiceModel.erlang(2.0, shape=2)
        got = kl_to_exponential(model, 2.0)
        want = kl_by_quadrature(
            lambda x: float(model.log_density(np.array([x]))[0]),
            lambda x: math.log(2.0) - 2.0 * x,
            0.0,
            60.0,
        )
        assert got == pytest.approx(want, abs=1e-6)
        # frozen closed-form value: ln 2 + psi(2) - 1, scale-invariant
        assert got == pytest.approx(0.11593151565841244, abs=1e-12)
        assert got == pytest.approx(erlang_kl_closed_form(2, 2.0, 2.0), abs=1e-12)

    def test_erlang_scale_invariance(self):
        for rate in (0.25, 1.0, 7.0):
            got = kl_to_exponential(ServiceModel.erlang(rate, shape=2), rate)
            assert got == pytest.approx(0.11593151565841244, abs=1e-10)

    def test_uniform_against_closed_form_and_monte_carlo(self):
        model = ServiceModel.uniform(2.0, halfwidth=0.2)
        got = kl_to_exponential(model, 2.0)
        want = uniform_kl_closed_form(0.5, 0.2, 2.0)
        assert got == pytest.approx(want, abs=1e-9)

        def log_f(x):
            return np.where((x >= 0.3) & (x <= 0.7), -math.log(0.4), -math.inf)

        def log_g(x):
            return math.log(2.0) - 2.0 * x

        mc, se = kl_by_monte_carlo(
            lambda rng, m: rng.uniform(0.3, 0.7, m), log_f, log_g, 1_000_000,
            np.random.default_rng(31),
        )
        assert got == pytest.approx(mc, abs=4 * se + 1e-4)

    def test_nonnegative_across_family(self):
        for model in (
            ServiceModel.exponential(0.7),
            ServiceModel.erlang(1.3, shape=5),
            ServiceModel.uniform(1.0, halfwidth=0.5),
        ):
            for rate in (0.5, 1.0, 2.0):
                assert kl_to_exponential(model, rate) >= -1e-12

    def test_deterministic_diverges(self):
        with pytest.raises(UnsupportedLawError):
            kl_to_exponential(ServiceModel.deterministic(1.0), 1.0)


class TestInRegion:
    def test_no_key_needed_when_adversary_slower(self):
        point = RatePoint(arrival_rate=0.5, message_rate=0.2, key_rate=0.0)
        assert in_region(point, mm1_spec(mu1=1.0, mu2=0.8))

    def test_threshold_is_strict_when_positive(self):
        theta = 0.5 * math.log(2.0)
        spec = mm1_spec()
        at = RatePoint(arrival_rate=0.5, message_rate=0.1, key_rate=theta)
        above = RatePoint(arrival_rate=0.5, message_rate=0.1, key_rate=theta + 1e-9)
        assert not in_region(at, spec)
        assert in_region(above, spec)

    def test_capacity_edge_is_excluded(self):
        cap = covert_capacity(0.5, 1.0)
        spec = mm1_spec()
        assert not in_region(RatePoint(0.5, cap, 1.0), spec)
        assert in_region(RatePoint(0.5, cap - 1e-9, 1.0), spec)

    def test_negative_message_rate_excluded(self):
        assert not in_region(RatePoint(0.5, -0.1, 1.0), mm1_spec())

    def test_zero_rate_point_included(self):
        assert in_region(RatePoint(0.5, 0.0, 0.0), mm1_spec(mu1=1.0, mu2=0.9))

    def test_mg1_with_exponential_law_adds_nothing(self):
        spec_mm1 = mm1_spec()
        spec_mg1 = RegionSpec(
            mu1=1.0, mu2=2.0, kind=RegionKind.MG1,
            willie_service=ServiceModel.exponential(2.0),
        )
        rng = np.random.default_rng(32)
        for _ in range(200):
            r = float(rng.uniform(0.0, 0.4))
            rk = float(rng.uniform(0.0, 0.8))
            point = RatePoint(0.5, r, rk)
            # same threshold, but MG1 budgets R + R_K instead of R_K alone
            mm1_sum_oracle = (
                0.0 <= r < covert_capacity(0.5, 1.0)
                and r + rk > max(0.0, 0.5 * math.log(2.0))
            )
            assert in_region(point, spec_mg1) == mm1_sum_oracle
            assert in_region(point, spec_mm1) == (
                0.0 <= r < covert_capacity(0.5, 1.0) and rk > 0.5 * math.log(2.0)
            )

    def test_mg1_spec_validation(self):
        with pytest.raises(ParameterError):
            RegionSpec(mu1=1.0, mu2=2.0, kind=RegionKind.MG1)
        with pytest.raises(ParameterError):
            RegionSpec(
                mu1=1.0, mu2=2.0, kind=RegionKind.MG1,
                willie_service=ServiceModel.exponential(1.0),  # rate != mu2
            )
        with pytest.raises(UnsupportedLawError):
            RegionSpec(
                mu1=1.0, mu2=2.0, kind=RegionKind.MG1,
                willie_service=ServiceModel.deterministic(2.0),
            )


class TestChooseDummyRate:
    def test_worked_interval(self):
        # lower = ln2 - 0.5, upper = 0.5 ln2 - 0.1, midpoint between them
        point = RatePoint(arrival_rate=0.5, message_rate=0.1, key_rate=0.4)
        got = choose_dummy_rate(point, mm1_spec())
        lower = math.log(2.0) - 0.5
        upper = 0.5 * math.log(2.0) - 0.1
        assert lower == pytest.approx(0.19314718055994531, abs=1e-12)
        assert upper == pytest.approx(0.24657359027997264, abs=1e-12)
        assert got == pytest.approx(0.5 * (lower + upper), abs=1e-12)
        assert got == pytest.approx(0.21986038541995897, abs=1e-9)

    def test_zero_lower_bound_when_budget_is_ample(self):
        # R close to capacity with the masking constraint already slack
        point = RatePoint(arrival_rate=0.5, message_rate=covert_capacity(0.5, 1.0) - 0.01,
                          key_rate=0.0)
        got = choose_dummy_rate(point, mm1_spec(mu1=1.0, mu2=0.52))
        # resolvability needs R + R0 + RK >= 0.5*ln(0.52/0.5) ~ 0.0196 < R already
        assert got == pytest.approx(0.005, abs=1e-12)

    def test_back_substitution_satisfies_both_constraints(self):
        rng = np.random.default_rng(33)
        spec = mm1_spec()
        cap = covert_capacity(0.5, 1.0)
        theta = 0.5 * math.log(2.0)
        checked = 0
        while checked < 2000:
            r = float(rng.uniform(0.0, cap * 0.999))
            rk = float(rng.uniform(theta + 1e-9, theta + 1.0))
            point = RatePoint(0.5, r, rk)
            if not in_region(point, spec):
                continue
            r0 = choose_dummy_rate(point, spec)
            assert r + r0 <= cap + 1e-12
            assert r + r0 + rk >= 0.5 * math.log(4.0) - 1e-12
            checked += 1

    def test_outside_region_raises(self):
        with pytest.raises(InfeasibleRateError):
            choose_dummy_rate(RatePoint(0.5, 0.1, 0.0), mm1_spec())

    def test_mg1_empty_interval_raises(self):
        # high message rate: decodability cap binds before the masking floor
        model = ServiceModel.erlang(2.0, shape=2)
        spec = RegionSpec(mu1=1.0, mu2=2.0, kind=RegionKind.MG1, willie_service=model)
        kl = kl_to_exponential(model, 2.0)
        cap = covert_capacity(0.5, 1.0)
        point = RatePoint(0.5, cap - 1e-6, key_rate=0.0)
        # in the stated region (R + R_K above the sum threshold)...
        assert in_region(point, spec) == (cap - 1e-6 > 0.5 * (math.log(2.0) + kl))
        if in_region(point, spec):
            # ...but R0 would have to exceed the decodability slack
            need = 0.5 * (math.log(4.0) + kl) - (cap - 1e-6)
            assert need > 1e-6
            with pytest.raises(InfeasibleRateError):
                choose_dummy_rate(point, spec)


class TestNoKeyNeeded:
    def test_mm1_cases(self):
        assert no_key_needed(mm1_spec(mu1=2.0, mu2=1.0))
        assert not no_key_needed(mm1_spec(mu1=1.0, mu2=2.0))
        assert not no_key_needed(mm1_spec(mu1=1.0, mu2=1.0))  # strict

    def test_mg1_divergence_penalty(self):
        model = ServiceModel.erlang(1.0, shape=2)
        spec = RegionSpec(mu1=1.05, mu2=1.0, kind=RegionKind.MG1, willie_service=model)
        # ln(1.05) ~ 0.0488 < 0.1159: the shape penalty eats the rate advantage
        assert not no_key_needed(spec)
        spec_wide = RegionSpec(mu1=1.2, mu2=1.0, kind=RegionKind.MG1, willie_service=model)
        assert math.log(1.2) > 0.11593151565841244
        assert no_key_needed(spec_wide)
