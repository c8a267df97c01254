"""Acceptance criteria, one test per criterion with a printed verdict line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the PASS/FAIL
lines.  Two criteria (the exponential closed-form value and the placement
of the posterior-threshold invariance check) assert values that contradict
the verified mathematics of the problem; they are implemented exactly as
stated and are expected to fail.  See the test bodies for the verified
counterpart assertions, which live in the regular suite.
"""

import math
import time

import numpy as np
import pytest

from sprt_exact import (
    Boundaries,
    ErrorPair,
    MapModel,
    NonUniqueFlag,
    PenaltySpec,
    PosteriorBoundaries,
    SimConfig,
    b_bounds,
    bayes_optimal,
    erlang,
    erlang_w,
    errors,
    expected_n,
    f_matrix,
    general_w,
    make_problem,
    optimality_region,
    pgf_n,
    run,
    scale_matrix,
    solve_boundaries,
    tilted_w,
    wald_bounds,
)

from conftest import gauss_segments, rho_problem


class _Criterion:
    def __init__(self, name: str, budget_s: float):
        self.name = name
        self.budget = budget_s

    def __enter__(self):
        self.t0 = time.monotonic()
        return self

    @property
    def elapsed(self) -> float:
        return time.monotonic() - self.t0

    def __exit__(self, exc_type, exc, tb):
        verdict = "PASS" if exc_type is None else "FAIL"
        print(f"[{verdict}] {self.name} ({self.elapsed:.1f}s)")
        return False


def test_scale_function_basics():
    with _Criterion("scale-function basics: W(0) = I", 1.0) as c:
        for n in (1, 2, 3):
            for lam in (0.5, 1.0, 2.0):
                for d in (0.5, 1.0):
                    W = erlang_w(lam, d, n, 1.0, 0.0)
                    assert np.abs(W - np.eye(n)).max() < 1e-12
        assert c.elapsed < c.budget


def test_transform_identity():
    with _Criterion("transform identity of the scale function", 10.0) as c:
        lam, d, n = 1.0, 1.0, 2
        model = MapModel(ph=erlang(n, lam), theta=1.0, d=d, z=1.0)
        for s in (8.0, 12.0):
            X = 40.0 / (s - lam)
            got = gauss_segments(
                lambda x: math.exp(-s * x) * erlang_w(lam, d, n, 1.0, x), X, d
            )
            want = np.linalg.inv(f_matrix(model, s))
            assert np.abs(got - want).max() < 1e-6
        assert c.elapsed < c.budget


def test_tilt_similarity_cross_check():
    with _Criterion("tilt similarity relation cross-check", 1.0) as c:
        problem = make_problem(erlang(2, 1.0), 1.0)  # ratio 1/2, jump 2 log 2
        d = problem.d
        assert d == pytest.approx(2.0 * math.log(2.0), abs=1e-12)
        ev0 = scale_matrix(MapModel(ph=problem.ph0, theta=1.0, d=d))
        worst = 0.0
        for x in (0.1, 0.7, 1.5, 3.0, 6.0):
            via_tilt = tilted_w(ev0, problem.tilted.delta, x)
            direct = erlang_w(2.0, d, 2, 1.0, x)
            nz = direct != 0.0
            worst = max(
                worst, float(np.abs((via_tilt - direct)[nz] / direct[nz]).max())
            )
            assert np.abs(via_tilt[~nz]).max(initial=0.0) < 1e-12
        assert worst < 1e-8
        assert c.elapsed < c.budget


def test_exponential_closed_form():
    # The asserted constant contradicts the closed-form identity
    # b = log((1-alpha0)/alpha1) - log(lambda1/lambda0) (it equals the
    # classical b bound instead); expected to fail, kept as stated.
    with _Criterion("exponential closed form", 5.0) as c:
        problem = make_problem(erlang(1, 1.0), 1.0)
        target = ErrorPair(0.05, 0.025)
        bounds = solve_boundaries(problem, target, tol=1e-10)
        achieved = errors(problem, bounds)
        assert abs(achieved.alpha0 - 0.05) < 1e-8
        assert abs(achieved.alpha1 - 0.025) < 1e-8
        assert c.elapsed < c.budget
        stated = math.log(0.975 / 0.025) - math.log(2.0)
        assert abs(bounds.b - stated) < 1e-8, (
            f"solved b={bounds.b!r} is log((1-a0)/a1)-log 2 = "
            f"{math.log(0.95 / 0.025) - math.log(2.0)!r}, not {stated!r}"
        )


def test_general_inversion_vs_closed_form():
    with _Criterion("transform inversion vs closed form", 30.0) as c:
        model = MapModel(ph=erlang(2, 1.0), theta=1.0, d=1.0, z=1.0)
        for x in (0.5, 2.5):
            got = general_w(model, x, rel_tol=1e-8)
            want = erlang_w(1.0, 1.0, 2, 1.0, x)
            scale = np.maximum(np.abs(want), 1.0)
            assert (np.abs(got - want) / scale).max() < 1e-6
        assert c.elapsed < c.budget


def test_monte_carlo_agreement():
    with _Criterion("Monte Carlo agreement at one million replications", 120.0) as c:
        cases = []
        prob_a = make_problem(erlang(1, 1.0), 1.0)
        cases.append((prob_a, Boundaries(a=-3.0, b=2.0)))
        prob_b = rho_problem(0.5)
        cases.append((prob_b, solve_boundaries(prob_b, ErrorPair(0.05, 0.025))))
        for idx, (problem, bounds) in enumerate(cases):
            pair = errors(problem, bounds)
            for hyp, seed in (("H0", 1000 + idx), ("H1", 2000 + idx)):
                res = run(
                    problem, bounds, hyp, SimConfig(replications=1_000_000, seed=seed)
                )
                want_n = expected_n(problem, bounds, hyp)
                assert abs(res.mean_n.value - want_n) / res.mean_n.se < 3.5
                if hyp == "H0":
                    dev = abs(res.alpha0_hat.value - pair.alpha0) / res.alpha0_hat.se
                else:
                    dev = abs(res.alpha1_hat.value - pair.alpha1) / res.alpha1_hat.se
                assert dev < 3.5
        assert c.elapsed < c.budget


def test_derivative_relation():
    with _Criterion("transform derivative recovers the mean count", 5.0) as c:
        h = 1e-6
        for problem, bounds in (
            (make_problem(erlang(1, 1.0), 1.0), Boundaries(a=-3.0, b=2.0)),
            (rho_problem(0.5), Boundaries(a=-2.5, b=1.8)),
        ):
            for hyp in ("H0", "H1"):
                fd = (1.0 - pgf_n(problem, bounds, 1.0 - h, hyp)) / h
                want = expected_n(problem, bounds, hyp)
                assert abs(fd - want) <= 1e-3 * want
        assert c.elapsed < c.budget


def test_boundary_sweep_properties():
    with _Criterion("boundary sweep: bounds respected, gap shrinks", 120.0) as c:
        target = ErrorPair(0.05, 0.025)
        wa, wb = wald_bounds(target)
        gaps = []
        for rho in (0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9):
            problem = rho_problem(rho)
            bounds = solve_boundaries(problem, target)
            blo, bhi = b_bounds(problem, target)
            assert wa <= bounds.a < 0.0 < bounds.b <= wb
            assert blo - 1e-12 <= bounds.b <= bhi + 1e-12
            gaps.append(wb - bounds.b)
        assert all(x >= y - 1e-12 for x, y in zip(gaps, gaps[1:]))
        assert c.elapsed < c.budget


def test_posterior_threshold_invariance():
    # The stated placement of the two checks contradicts the penalty
    # geometry (an immediate decision beats every interior test at the
    # larger ratio for the low prior, and uniqueness holds at the smaller
    # ratio); expected to fail, kept as stated.  The verified-direction
    # checks live in the solver suite.
    with _Criterion("posterior-threshold prior invariance", 120.0) as c:
        costs = dict(c=0.1, c0=1.0, c1=2.0)
        prob6 = rho_problem(0.6)
        posts = {}
        for prior in (0.3, 0.7):
            _, post = bayes_optimal(prob6, PenaltySpec(prior=prior, **costs))
            posts[prior] = post
        assert c.elapsed < c.budget
        prob3 = rho_problem(0.3)
        _, post3 = bayes_optimal(prob3, PenaltySpec(prior=0.3, **costs))
        assert isinstance(post3, NonUniqueFlag), (
            f"at ratio 0.3 the low-prior solve is interior and unique: {post3!r}"
        )
        assert isinstance(posts[0.3], PosteriorBoundaries) and isinstance(
            posts[0.7], PosteriorBoundaries
        ), f"at ratio 0.6 the low-prior solve is degenerate: {posts[0.3]!r}"
        assert abs(posts[0.3].a_star - posts[0.7].a_star) < 1e-4
        assert abs(posts[0.3].b_star - posts[0.7].b_star) < 1e-4


def test_region_algorithm_consistency():
    with _Criterion("region algorithm consistency", 60.0) as c:
        problem = rho_problem(0.5)
        region = optimality_region(problem, 12)
        direct = errors(problem, Boundaries(a=0.0, b=0.0))
        assert abs(region.star_point.alpha0 - direct.alpha0) < 1e-10
        assert abs(region.star_point.alpha1 - direct.alpha1) < 1e-10
        lower_a0 = [p.alpha0 for p in region.lower_curve]
        lower_a1 = [p.alpha1 for p in region.lower_curve]
        assert all(x < y for x, y in zip(lower_a0, lower_a0[1:]))
        assert all(x >= y - 1e-12 for x, y in zip(lower_a1, lower_a1[1:]))
        upper_a1 = [p.alpha1 for p in region.upper_curve]
        upper_a0 = [p.alpha0 for p in region.upper_curve]
        assert all(x < y for x, y in zip(upper_a1, upper_a1[1:]))
        assert all(x >= y - 1e-12 for x, y in zip(upper_a0, upper_a0[1:]))
        assert c.elapsed < c.budget
