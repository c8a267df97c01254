"""Inverse solves, the achievable-error region, and the penalty formulation."""

import math

import numpy as np
import pytest

from sprt_exact import (
    Boundaries,
    DegenerateTargets,
    ErrorPair,
    NonUniqueFlag,
    OutsideOptimalityRegion,
    PenaltySpec,
    PosteriorBoundaries,
    ValidationError,
    b_bounds,
    bayes_optimal,
    errors,
    optimality_region,
    penalty,
    posterior_boundaries,
    solve_boundaries,
    wald_bounds,
)

from conftest import rho_problem

_COSTS = dict(c=0.1, c0=1.0, c1=2.0)


class TestSolveBoundaries:
    def test_exponential_closed_form_upper_boundary(self, prob_exp):
        # Example-case identity: b = log((1-alpha0)/alpha1) - log(lambda1/lambda0).
        target = ErrorPair(0.05, 0.025)
        bounds = solve_boundaries(prob_exp, target, tol=1e-12)
        want_b = math.log(0.95 / 0.025) - math.log(2.0)
        assert bounds.b == pytest.approx(want_b, abs=1e-10)
        achieved = errors(prob_exp, bounds)
        assert achieved.alpha0 == pytest.approx(0.05, abs=1e-12)
        assert achieved.alpha1 == pytest.approx(0.025, abs=1e-12)

    def test_round_trip_on_boundary_grid(self, prob_erlang2):
        for a in (-1.0, -2.5):
            for b in (0.8, 2.2):
                target = errors(prob_erlang2, Boundaries(a=a, b=b))
                solved = solve_boundaries(prob_erlang2, target, tol=1e-10)
                assert solved.a == pytest.approx(a, abs=1e-6)
                assert solved.b == pytest.approx(b, abs=1e-6)
                again = errors(prob_erlang2, solved)
                assert again.alpha0 == pytest.approx(target.alpha0, abs=2e-10)
                assert again.alpha1 == pytest.approx(target.alpha1, abs=2e-10)

    def test_solution_respects_all_bounds(self):
        target = ErrorPair(0.05, 0.025)
        for rho in (0.35, 0.55, 0.75):
            prob = rho_problem(rho)
            bounds = solve_boundaries(prob, target)
            wa, wb = wald_bounds(target)
            blo, bhi = b_bounds(prob, target)
            assert wa <= bounds.a < 0.0
            assert bounds.b <= wb
            assert blo - 1e-12 <= bounds.b <= bhi + 1e-12

    def test_star_point_solves_to_origin(self, prob_erlang2):
        star = errors(prob_erlang2, Boundaries(a=0.0, b=0.0))
        solved = solve_boundaries(
            prob_erlang2, ErrorPair(star.alpha0, star.alpha1), tol=1e-9
        )
        assert abs(solved.a) < 1e-6
        assert abs(solved.b) < 1e-6

    def test_outside_region_detected(self, prob_erlang2):
        star = errors(prob_erlang2, Boundaries(a=0.0, b=0.0))
        dominated = ErrorPair(
            min(star.alpha0 * 1.2, 0.9), min(star.alpha1 * 1.2, 0.9)
        )
        with pytest.raises(OutsideOptimalityRegion):
            solve_boundaries(prob_erlang2, dominated)

    def test_degenerate_targets_rejected(self, prob_erlang2):
        with pytest.raises(DegenerateTargets):
            solve_boundaries(prob_erlang2, ErrorPair(0.7, 0.3))


class TestOptimalityRegion:
    def test_star_point_matches_direct_evaluation(self, prob_erlang2):
        region = optimality_region(prob_erlang2, 8)
        direct = errors(prob_erlang2, Boundaries(a=0.0, b=0.0))
        assert region.star_point.alpha0 == pytest.approx(direct.alpha0, abs=1e-10)
        assert region.star_point.alpha1 == pytest.approx(direct.alpha1, abs=1e-10)

    def test_lower_branch_monotone_and_above_star(self, prob_erlang2):
        region = optimality_region(prob_erlang2, 10)
        a0s = [p.alpha0 for p in region.lower_curve]
        a1s = [p.alpha1 for p in region.lower_curve]
        assert all(x < y for x, y in zip(a0s, a0s[1:]))  # sweep is ascending
        assert all(x >= y - 1e-12 for x, y in zip(a1s, a1s[1:]))  # Type II falls
        assert all(p.alpha1 >= region.star_point.alpha1 - 1e-12 for p in region.lower_curve)

    def test_upper_branch_mirrors(self, prob_erlang2):
        region = optimality_region(prob_erlang2, 10)
        a1s = [p.alpha1 for p in region.upper_curve]
        a0s = [p.alpha0 for p in region.upper_curve]
        assert all(x < y for x, y in zip(a1s, a1s[1:]))
        assert all(x >= y - 1e-12 for x, y in zip(a0s, a0s[1:]))

    def test_membership_for_paper_targets(self):
        region = optimality_region(rho_problem(0.5), 12)
        assert region.contains(ErrorPair(0.05, 0.025))
        star = region.star_point
        assert not region.contains(
            ErrorPair(min(star.alpha0 + 0.1, 1.0), min(star.alpha1 + 0.1, 1.0))
        )

    def test_branch_tails_stay_off_the_far_axis(self, prob_erlang2):
        # Toward vanishing Type I error the b = 0 branch approaches a
        # finite Type II limit below one (the curve meets the error axis).
        region = optimality_region(prob_erlang2, 10)
        tail = region.lower_curve[0]
        assert tail.alpha0 < region.star_point.alpha0 / 5.0
        assert region.star_point.alpha1 < tail.alpha1 < 1.0

    def test_curve_points_are_achievable_errors(self, prob_erlang2):
        # Every sampled point reproduces through the forward map.
        region = optimality_region(prob_erlang2, 5)
        for point in region.lower_curve[:-1]:
            solved = solve_boundaries(prob_erlang2, point, tol=1e-8)
            assert abs(solved.b) < 1e-6  # on the b = 0 branch

    def test_grid_size_validated(self, prob_erlang2):
        with pytest.raises(ValidationError):
            optimality_region(prob_erlang2, 1)


class TestBayes:
    def test_posterior_thresholds_prior_free_in_interior_regime(self):
        # Below the pinning threshold both priors recover identical
        # posterior thresholds.
        prob = rho_problem(0.3)
        results = {}
        for prior in (0.3, 0.7):
            _, post = bayes_optimal(prob, PenaltySpec(prior=prior, **_COSTS))
            assert isinstance(post, PosteriorBoundaries)
            results[prior] = post
        assert results[0.3].a_star == pytest.approx(results[0.7].a_star, abs=1e-4)
        assert results[0.3].b_star == pytest.approx(results[0.7].b_star, abs=1e-4)

    def test_log_boundaries_shift_with_prior(self):
        # (a, b) differ across priors by exactly the prior offset when the
        # posterior thresholds coincide.
        prob = rho_problem(0.3)
        b3, _ = bayes_optimal(prob, PenaltySpec(prior=0.3, **_COSTS))
        b7, _ = bayes_optimal(prob, PenaltySpec(prior=0.7, **_COSTS))
        shift = math.log(0.7 / 0.3) - math.log(0.3 / 0.7)
        assert b3.a - b7.a == pytest.approx(shift, abs=1e-3)
        assert b3.b - b7.b == pytest.approx(shift, abs=1e-3)

    def test_hard_ratio_loses_uniqueness_for_low_prior(self):
        # Costly sampling at high rho: a low prior is already past the
        # lower posterior threshold, so deciding immediately is optimal
        # and the upper boundary is arbitrary.
        prob = rho_problem(0.6)
        bounds, post = bayes_optimal(prob, PenaltySpec(prior=0.3, **_COSTS))
        assert isinstance(post, NonUniqueFlag)
        _, post7 = bayes_optimal(prob, PenaltySpec(prior=0.7, **_COSTS))
        assert isinstance(post7, PosteriorBoundaries)

    def test_minimizer_beats_reference_point(self):
        prob = rho_problem(0.4)
        spec = PenaltySpec(prior=0.5, **_COSTS)
        bounds, _ = bayes_optimal(prob, spec)
        assert penalty(prob, bounds, spec) <= penalty(prob, Boundaries(-1.0, 1.0), spec) + 1e-9

    def test_zero_prior_collapses(self):
        # All weight on the alternative: accepting it immediately is free.
        prob = rho_problem(0.4)
        spec = PenaltySpec(prior=0.0, **_COSTS)
        bounds, post = bayes_optimal(prob, spec)
        assert isinstance(post, NonUniqueFlag)
        assert penalty(prob, bounds, spec) <= penalty(prob, Boundaries(-1.0, 1.0), spec)

    def test_penalty_spec_validation(self):
        with pytest.raises(ValidationError):
            PenaltySpec(prior=1.2, c=0.1, c0=1.0, c1=2.0)
        with pytest.raises(ValidationError):
            PenaltySpec(prior=0.5, c=-0.1, c0=1.0, c1=2.0)


class TestPosteriorBoundaries:
    def test_even_prior_is_plain_logistic(self):
        pb = posterior_boundaries(Boundaries(a=-1.0, b=2.0), 0.5)
        assert pb.a_star == pytest.approx(1.0 / (1.0 + math.exp(1.0)), abs=1e-14)
        assert pb.b_star == pytest.approx(1.0 / (1.0 + math.exp(-2.0)), abs=1e-14)

    def test_origin_maps_to_half(self):
        pb = posterior_boundaries(Boundaries(a=0.0, b=0.0), 0.5)
        assert pb.a_star == pytest.approx(0.5, abs=1e-15)
        assert pb.b_star == pytest.approx(0.5, abs=1e-15)

    def test_round_trip_random_triples(self):
        rng = np.random.default_rng(4)
        for _ in range(40):
            a_star = rng.uniform(0.01, 0.49)
            b_star = rng.uniform(a_star, 0.99)
            prior = rng.uniform(0.05, 0.95)
            offset = math.log((1.0 - prior) / prior)
            a = math.log(a_star / (1.0 - a_star)) + offset
            b = math.log(b_star / (1.0 - b_star)) + offset
            if a > 0.0 or b < 0.0:
                continue
            pb = posterior_boundaries(Boundaries(a=a, b=b), prior)
            assert pb.a_star == pytest.approx(a_star, abs=1e-12)
            assert pb.b_star == pytest.approx(b_star, abs=1e-12)

    def test_prior_must_be_interior(self):
        with pytest.raises(ValidationError):
            posterior_boundaries(Boundaries(a=-1.0, b=1.0), 0.0)
