"""Masking mechanism: atom placement, zero mean, likelihood-ratio guarantee."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noisycfmm import (
    EPSILON_FLOOR,
    InfeasibleBiasError,
    MisalignedSupportError,
    NoiseDistribution,
    PrivacySpec,
    SpecViolationError,
    biased_binary,
    biased_factory,
    binary_mechanism,
    verify_pldp,
)

# Atom positions and probabilities are closed-form; mean() is a two-term sum
# whose cancellation error scales with the atom magnitude, so the zero-mean
# bound is stated relative to the interval width with moderate epsilons.
ZERO_MEAN_TOL = 1e-12
# Ratio extremes are achieved exactly at interval endpoints.
RATIO_TOL = 1e-6

REF_SPEC = PrivacySpec(0.0, 2.0, 2.0)


def spec_strategy(min_eps=0.05, max_eps=20.0):
    return st.tuples(
        st.floats(min_value=-50.0, max_value=50.0),
        st.floats(min_value=1e-3, max_value=40.0),
        st.floats(min_value=min_eps, max_value=max_eps),
        st.floats(min_value=0.0, max_value=1.0),
    ).map(
        lambda t: (PrivacySpec(t[0], t[0] + t[1], t[2]), t[0] + t[3] * t[1])
    )


class TestPrivacySpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            PrivacySpec(2.0, 0.0, 1.0)
        with pytest.raises(ValueError):
            PrivacySpec(0.0, 1.0, 0.0)
        with pytest.raises(ValueError):
            PrivacySpec(0.0, 1.0, -2.0)
        with pytest.raises(ValueError):
            PrivacySpec(math.nan, 1.0, 1.0)

    def test_degenerate_forms(self):
        assert PrivacySpec(1.0, 1.0, 2.0).degenerate
        assert PrivacySpec(0.0, 2.0, math.inf).degenerate
        assert not REF_SPEC.degenerate

    def test_recentered(self):
        moved = REF_SPEC.recentered(10.0)
        assert moved.width == REF_SPEC.width
        assert moved.epsilon == REF_SPEC.epsilon
        assert moved.midpoint == 10.0

    def test_json_round_trip(self):
        obj = REF_SPEC.to_json_obj()
        assert obj == {"tau": [0.0, 2.0], "epsilon": 2.0}


class TestBinaryMechanism:
    def test_reference_atoms(self):
        # midpoint trade: symmetric atoms at +-w/tanh(eps/2), equal mass
        d = binary_mechanism(1.0, REF_SPEC)
        big = 1.0 / math.tanh(1.0)
        assert [a.eta for a in d.atoms] == pytest.approx([-big, big], rel=1e-15)
        assert [a.p for a in d.atoms] == [0.5, 0.5]

    def test_endpoint_atoms(self):
        # trade at the interval's upper end: mass tilts to the small-noise atom
        d = binary_mechanism(2.0, REF_SPEC)
        t = math.tanh(1.0)
        big = 1.0 / t
        assert d.atoms[0].eta == pytest.approx(-1.0 - big, rel=1e-15)
        assert d.atoms[1].eta == pytest.approx(-1.0 + big, rel=1e-15)
        assert d.atoms[0].p == pytest.approx(0.11920292202211757, rel=1e-12)
        assert d.atoms[1].p == pytest.approx(0.8807970779778824, rel=1e-12)
        # probability ratio between endpoint trades is exactly the privacy bound
        assert d.atoms[1].p / d.atoms[0].p == pytest.approx(math.exp(2.0), rel=1e-12)

    def test_landmarks_do_not_depend_on_input(self):
        # post-noise positions delta+eta are a function of the spec alone;
        # this is what makes the guarantee verifiable on a shared support
        lands = {
            round(delta + a.eta, 12)
            for delta in (0.0, 0.3, 1.0, 1.7, 2.0)
            for a in binary_mechanism(delta, REF_SPEC).atoms
        }
        assert len(lands) == 2

    def test_degenerate_is_exact(self):
        d = binary_mechanism(1.0, PrivacySpec(1.0, 1.0, 2.0))
        assert d.is_zero_noise
        d = binary_mechanism(1.0, PrivacySpec(0.0, 2.0, math.inf))
        assert d.is_zero_noise

    def test_outside_interval_rejected(self):
        with pytest.raises(SpecViolationError):
            binary_mechanism(3.0, REF_SPEC)

    def test_epsilon_floor(self):
        with pytest.raises(SpecViolationError):
            binary_mechanism(1.0, PrivacySpec(0.0, 2.0, 0.5 * EPSILON_FLOOR))

    @given(pair=spec_strategy())
    @settings(max_examples=100, deadline=None)
    def test_zero_mean(self, pair):
        spec, delta = pair
        d = binary_mechanism(delta, spec)
        assert abs(d.mean()) <= ZERO_MEAN_TOL * max(1.0, spec.width), (
            f"mean {d.mean()} for delta={delta} spec={spec}"
        )

    @given(pair=spec_strategy())
    @settings(max_examples=50, deadline=None)
    def test_probabilities_valid(self, pair):
        spec, delta = pair
        d = binary_mechanism(delta, spec)
        assert all(0.0 <= a.p <= 1.0 for a in d.atoms)
        assert sum(a.p for a in d.atoms) == pytest.approx(1.0, abs=1e-12)


class TestSampling:
    def test_single_atom_consumes_no_randomness(self):
        rng = np.random.default_rng(0)
        before = rng.bit_generator.state
        NoiseDistribution.zero().sample(rng)
        assert rng.bit_generator.state == before

    def test_two_atom_needs_rng(self):
        d = binary_mechanism(1.0, REF_SPEC)
        with pytest.raises(ValueError):
            d.sample(None)

    def test_frequencies(self):
        d = binary_mechanism(2.0, REF_SPEC)  # probs (0.8808, 0.1192)
        rng = np.random.default_rng(123)
        draws = [d.sample(rng) for _ in range(20000)]
        hi_share = np.mean([x == d.atoms[1].eta for x in draws])
        assert hi_share == pytest.approx(d.atoms[1].p, abs=0.01)

    def test_same_seed_same_draws(self):
        d = binary_mechanism(0.7, REF_SPEC)
        a = [d.sample(np.random.default_rng(5)) for _ in range(3)]
        b = [d.sample(np.random.default_rng(5)) for _ in range(3)]
        assert a == b


class TestBiasedBinary:
    def test_spec_fixture(self):
        # the adversarial fixture: atoms +-1 with probabilities 0.6/0.4
        d = NoiseDistribution.from_pairs([(-1.0, 0.4), (1.0, 0.6)])
        assert d.mean() == pytest.approx(0.2, rel=1e-15)

    def test_requested_mean_is_hit(self):
        d = biased_binary(1.0, REF_SPEC, 0.25)
        assert d.mean() == pytest.approx(0.25, rel=1e-12)
        assert d.support() == binary_mechanism(1.0, REF_SPEC).support()

    def test_infeasible_mean(self):
        big = 1.0 / math.tanh(1.0)
        with pytest.raises(InfeasibleBiasError):
            biased_binary(1.0, REF_SPEC, big * 1.01)
        with pytest.raises(InfeasibleBiasError):
            biased_binary(1.0, PrivacySpec(1.0, 1.0, 2.0), 0.1)

    def test_factory_spares_exact_trades(self):
        f = biased_factory(0.3)
        assert f(5.0, PrivacySpec(5.0, 5.0, 2.0)).is_zero_noise
        assert f(1.0, REF_SPEC).mean() == pytest.approx(0.3, rel=1e-12)


class TestDistributionValidation:
    def test_probabilities_must_sum_to_one(self):
        with pytest.raises(ValueError):
            NoiseDistribution.from_pairs([(-1.0, 0.4), (1.0, 0.4)])

    def test_negative_probability(self):
        with pytest.raises(ValueError):
            NoiseDistribution.from_pairs([(-1.0, -0.1), (1.0, 1.1)])

    def test_json_round_trip(self):
        d = binary_mechanism(1.3, REF_SPEC)
        again = NoiseDistribution.from_json_obj(d.to_json_obj())
        assert again.support() == d.support()
        assert [a.p for a in again.atoms] == [a.p for a in d.atoms]


class TestVerifyPLDP:
    def test_reference_tightness(self):
        report = verify_pldp(lambda v: binary_mechanism(v, REF_SPEC), REF_SPEC, 101)
        assert report.satisfied
        assert report.max_ratio == pytest.approx(math.exp(2.0), abs=RATIO_TOL)

    @given(pair=spec_strategy(min_eps=0.1, max_eps=6.0))
    @settings(max_examples=30, deadline=None)
    def test_tight_across_specs(self, pair):
        spec, _ = pair
        report = verify_pldp(lambda v: binary_mechanism(v, spec), spec, 21)
        assert report.satisfied, f"spec={spec} ratio={report.max_ratio}"
        assert report.max_ratio == pytest.approx(math.exp(spec.epsilon), rel=1e-9)

    def test_degenerate_spec_trivially_private(self):
        spec = PrivacySpec(1.0, 1.0, 2.0)
        report = verify_pldp(lambda v: binary_mechanism(v, spec), spec, 11)
        assert report.satisfied
        assert report.max_ratio == 1.0

    def test_violation_detected(self):
        # a mechanism that leaks: tighter probabilities than epsilon=2 allows
        cheat_spec = PrivacySpec(0.0, 2.0, 5.0)

        def leaky(v):
            return biased_binary(v, cheat_spec, 0.0)

        report = verify_pldp(leaky, PrivacySpec(0.0, 2.0, 0.5), 21)
        assert not report.satisfied

    def test_drifting_support_is_a_leak(self):
        # input-dependent landmarks give away the input: infinite ratio
        def drifting(v):
            return NoiseDistribution.from_pairs([(-1.0 - v * 1e-5, 0.5), (1.0, 0.5)])

        report = verify_pldp(drifting, REF_SPEC, 21)
        assert not report.satisfied
        assert math.isinf(report.max_ratio)

    def test_ambiguous_support_rejected(self):
        # two atoms of one input inside the matching tolerance cannot be bucketed
        def ambiguous(v):
            return NoiseDistribution.from_pairs([(0.0, 0.5), (1e-12, 0.5)])

        with pytest.raises(MisalignedSupportError):
            verify_pldp(ambiguous, REF_SPEC, 5)

    def test_infinite_epsilon_bound(self):
        spec = PrivacySpec(0.0, 2.0, math.inf)
        report = verify_pldp(lambda v: binary_mechanism(v, spec), spec, 11)
        assert report.satisfied
