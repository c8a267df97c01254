"""Inverse problems for the sequential test.

Three services built on the forward error/sample-count formulas:

* :func:`solve_boundaries` -- find ``a < 0 < b`` achieving target errors,
  by nested bracketing root finds justified by the monotonicity of the
  exit probabilities in each boundary;
* :func:`optimality_region` -- trace the boundary of the set of error
  pairs achievable with interior boundaries (where the test is optimal);
* :func:`bayes_optimal` / :func:`posterior_boundaries` -- minimize the
  prior-weighted penalty ``pi (c E0N + c0 a0) + (1-pi) (c E1N + c1 a1)``
  and, when the minimizer is interior and locally unique, map it to
  thresholds on the posterior probability of the null.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize

from .exceptions import (
    NoConvergence,
    NumericalError,
    OutsideOptimalityRegion,
    SprtExactError,
    ValidationError,
)
from .sprt import (
    Boundaries,
    ErrorPair,
    TestProblem,
    b_bounds,
    errors,
    expected_n,
)

# Root-find tolerances: boundary coordinates are resolved far below the
# default error tolerance so the final verification dominates.
_XTOL = 1e-13
_MAXITER = 200

# Interior offset used when evaluating penalties "at" a pinned boundary.
_EDGE = 1e-9


@dataclass(frozen=True)
class PenaltySpec:
    """Prior probability of the null and the three penalty costs."""

    prior: float
    c: float
    c0: float
    c1: float

    def __post_init__(self):
        if not 0.0 <= self.prior <= 1.0:
            raise ValidationError(f"prior must lie in [0,1], got {self.prior}")
        if min(self.c, self.c0, self.c1) <= 0.0:
            raise ValidationError("all penalty costs must be positive")


@dataclass(frozen=True)
class PosteriorBoundaries:
    """Stopping thresholds on the posterior probability of the null."""

    a_star: float
    b_star: float

    def __post_init__(self):
        if not 0.0 <= self.a_star <= self.b_star <= 1.0:
            raise ValidationError(
                f"need 0 <= a* <= b* <= 1, got {(self.a_star, self.b_star)}"
            )


@dataclass(frozen=True)
class NonUniqueFlag:
    """Signals that no unique penalty-minimizing pair exists."""

    reason: str


@dataclass(frozen=True)
class RegionBoundary:
    """Sampled boundary of the achievable-error region.

    ``lower_curve`` holds the ``b = 0`` branch ordered by increasing Type I
    error, ``upper_curve`` the ``a = 0`` branch ordered by increasing
    Type II error; both end at the shared ``star_point`` (the errors at
    ``a = b = 0``).
    """

    star_point: ErrorPair
    lower_curve: list[ErrorPair]
    upper_curve: list[ErrorPair]

    def contains(self, target: ErrorPair) -> bool:
        """Approximate membership test against the sampled boundary."""
        t0, t1 = target.alpha0, target.alpha1
        if t0 <= 0.0 or t1 <= 0.0:
            return False
        if t0 < self.star_point.alpha0:
            xs = [p.alpha0 for p in self.lower_curve]
            ys = [p.alpha1 for p in self.lower_curve]
            return t1 < float(np.interp(t0, xs, ys))
        if t1 < self.star_point.alpha1:
            xs = [p.alpha1 for p in self.upper_curve]
            ys = [p.alpha0 for p in self.upper_curve]
            return t0 < float(np.interp(t1, xs, ys))
        return False


def _solve_lower_boundary(problem: TestProblem, b: float, target_a0: float) -> float:
    """Find ``a <= 0`` with ``alpha0(a, b) = target_a0`` by bracketed root find.

    The Type I error decreases as the lower boundary moves down, from its
    maximum at ``a = 0``; the caller guarantees that maximum is above the
    target.
    """

    def f(a: float) -> float:
        return errors(problem, Boundaries(a=a, b=b)).alpha0 - target_a0

    hi = 0.0
    f_hi = f(hi)
    if f_hi < 0.0:
        raise OutsideOptimalityRegion(
            f"alpha0 target {target_a0} unreachable at b={b} (max {f_hi + target_a0})"
        )
    lo = -1.0
    for _ in range(80):
        f_lo = f(lo)
        if f_lo < 0.0:
            break
        hi, f_hi = lo, f_lo
        lo *= 2.0
    else:
        raise NoConvergence(f"no lower bracket for alpha0={target_a0} at b={b}")
    if f_hi == 0.0:
        return hi
    return float(brentq(f, lo, hi, xtol=_XTOL, maxiter=_MAXITER))


def _solve_upper_boundary(problem: TestProblem, a: float, target_a1: float) -> float:
    """Find ``b >= 0`` with ``alpha1(a, b) = target_a1`` (mirror search)."""

    def f(b: float) -> float:
        return errors(problem, Boundaries(a=a, b=b)).alpha1 - target_a1

    lo = 0.0
    f_lo = f(lo)
    if f_lo < 0.0:
        raise OutsideOptimalityRegion(
            f"alpha1 target {target_a1} unreachable at a={a} (max {f_lo + target_a1})"
        )
    hi = 1.0
    for _ in range(80):
        f_hi = f(hi)
        if f_hi < 0.0:
            break
        lo, f_lo = hi, f_hi
        hi *= 2.0
    else:
        raise NoConvergence(f"no upper bracket for alpha1={target_a1} at a={a}")
    if f_lo == 0.0:
        return lo
    return float(brentq(f, lo, hi, xtol=_XTOL, maxiter=_MAXITER))


def solve_boundaries(
    problem: TestProblem, target: ErrorPair, tol: float = 1e-10
) -> Boundaries:
    """Boundaries achieving the target errors, to ``tol`` componentwise.

    Nested bracketing root finds: the outer search runs over ``b`` inside
    the sharpened two-sided bounds, the inner search matches the Type I
    error with ``a``, and the outer residual matches the Type II error.
    Monotonicity of both error components makes the scheme globally
    convergent on the achievable region.

    Raises
    ------
    DegenerateTargets
        If ``alpha0 + alpha1 >= 1`` or a component is not positive.
    OutsideOptimalityRegion
        If no interior pair achieves the targets.
    NoConvergence
        If the verification against the targets fails after the solve.
    """
    lo_b, hi_b = b_bounds(problem, target)
    if hi_b <= 0.0:
        raise OutsideOptimalityRegion(
            f"targets {target} force a nonpositive upper boundary "
            f"(bound {hi_b:.6g}); no interior test achieves them"
        )
    lo_b = max(lo_b, 0.0)

    def feasibility_gap(b: float) -> float:
        return errors(problem, Boundaries(a=0.0, b=b)).alpha0 - target.alpha0

    if feasibility_gap(lo_b) < 0.0:
        # Need a larger b before alpha0 is reachable with a <= 0; the
        # switchover point lies on the a = 0 branch of the region boundary.
        if feasibility_gap(hi_b) < 0.0:
            raise OutsideOptimalityRegion(
                f"targets {target} unreachable: alpha0 stays below target on "
                f"the admissible b range [{lo_b:.6g}, {hi_b:.6g}]"
            )
        lo_b = float(brentq(feasibility_gap, lo_b, hi_b, xtol=_XTOL, maxiter=_MAXITER))

    def residual(b: float) -> float:
        a = _solve_lower_boundary(problem, b, target.alpha0)
        return errors(problem, Boundaries(a=a, b=b)).alpha1 - target.alpha1

    r_lo = residual(lo_b)
    if r_lo < -tol:
        raise OutsideOptimalityRegion(
            f"targets {target} lie outside the achievable region "
            f"(alpha1 deficit {r_lo:.3e} at smallest admissible b)"
        )
    r_hi = residual(hi_b)
    if r_hi > tol:
        raise OutsideOptimalityRegion(
            f"targets {target} unreachable: alpha1 above target by {r_hi:.3e} "
            "at the upper b bound"
        )
    if abs(r_lo) <= tol:
        b = lo_b
    elif abs(r_hi) <= tol:
        b = hi_b
    else:
        b = float(brentq(residual, lo_b, hi_b, xtol=_XTOL, maxiter=_MAXITER))
    a = _solve_lower_boundary(problem, b, target.alpha0)
    out = Boundaries(a=a, b=b)

    achieved = errors(problem, out)
    if (
        abs(achieved.alpha0 - target.alpha0) > tol
        or abs(achieved.alpha1 - target.alpha1) > tol
    ):
        raise NoConvergence(
            f"solved boundaries {out} achieve {achieved}, not {target} within {tol}"
        )
    return out


def optimality_region(problem: TestProblem, grid_size: int) -> RegionBoundary:
    """Trace the boundary of the error pairs achievable with ``a < 0 < b``.

    Step 1 evaluates the errors at ``a = b = 0`` (the corner of the
    region); step 2 fixes ``b = 0`` and sweeps the Type I target below its
    corner value, solving for ``a``; step 3 mirrors with ``a = 0``.
    Outside this region a test deciding immediately with positive
    probability beats every interior-boundary test.
    """
    if grid_size < 2:
        raise ValidationError(f"grid_size must be at least 2, got {grid_size}")
    star = errors(problem, Boundaries(a=0.0, b=0.0))

    fractions = np.linspace(1.0 / (grid_size + 1), grid_size / (grid_size + 1.0), grid_size)
    lower = []
    for i, frac in enumerate(fractions):
        t0 = star.alpha0 * float(frac)
        try:
            a = _solve_lower_boundary(problem, 0.0, t0)
            lower.append(errors(problem, Boundaries(a=a, b=0.0)))
        except SprtExactError as exc:
            raise type(exc)(
                f"region sweep (b=0 branch) failed at node {i} (alpha0={t0:.6g}): {exc}"
            ) from exc
    lower.append(star)

    upper = []
    for i, frac in enumerate(fractions):
        t1 = star.alpha1 * float(frac)
        try:
            b = _solve_upper_boundary(problem, 0.0, t1)
            upper.append(errors(problem, Boundaries(a=0.0, b=b)))
        except SprtExactError as exc:
            raise type(exc)(
                f"region sweep (a=0 branch) failed at node {i} (alpha1={t1:.6g}): {exc}"
            ) from exc
    upper.append(star)

    return RegionBoundary(star_point=star, lower_curve=lower, upper_curve=upper)


def penalty(problem: TestProblem, bounds: Boundaries, spec: PenaltySpec) -> float:
    """Prior-weighted average loss of the test with the given boundaries.

    Interior boundaries use the exact error and sample-count formulas;
    a pinned boundary means an immediate decision (zero observations,
    one error certain), independent of the other boundary.
    """
    if bounds.a >= -_EDGE:
        return spec.prior * spec.c0
    if bounds.b <= _EDGE:
        return (1.0 - spec.prior) * spec.c1
    ep = errors(problem, bounds)
    e0 = expected_n(problem, bounds, "H0", route="direct")
    e1 = expected_n(problem, bounds, "H1", route="direct")
    return spec.prior * (spec.c * e0 + spec.c0 * ep.alpha0) + (
        1.0 - spec.prior
    ) * (spec.c * e1 + spec.c1 * ep.alpha1)


# Penalty search box: boundaries beyond ~40 nats correspond to error rates
# below e^-40 and are never optimal at sane costs; the series-length cap
# keeps single evaluations from stalling in the small-jump corner.
_BOX = 40.0
_PENALTY_MAX_TERMS = 400.0


def _interior_penalty(problem, spec, a, b):
    """Penalty for the minimizer: numerical breakdown or excursions outside
    the search box count as an infinite penalty (the final candidate is
    re-evaluated strictly)."""
    if a < -_BOX or b > _BOX or (-a + b + problem.d) / problem.d > _PENALTY_MAX_TERMS:
        return math.inf
    try:
        return penalty(problem, Boundaries(a=min(a, -_EDGE), b=max(b, _EDGE)), spec)
    except NumericalError:
        return math.inf


def bayes_optimal(
    problem: TestProblem, spec: PenaltySpec, tol: float = 1e-6
) -> tuple[Boundaries, PosteriorBoundaries | NonUniqueFlag]:
    """Penalty-minimizing boundaries and, when unique, posterior thresholds.

    Runs a derivative-free multi-start minimization over the interior in
    log coordinates ``(a, b) = (-exp(u), exp(v))``, then compares against
    the two immediate-decision rules.  The posterior thresholds are
    returned only when the interior minimizer strictly beats both
    degenerate rules, stays away from the boundary, and passes a local
    uniqueness probe; otherwise a :class:`NonUniqueFlag` explains why.
    """
    accept_h1_now = spec.prior * spec.c0
    accept_h0_now = (1.0 - spec.prior) * spec.c1
    # Every interior test observes at least once, so its penalty is at
    # least c; an immediate rule at or below that floor wins outright.
    if min(accept_h1_now, accept_h0_now) <= spec.c + 1e-12:
        which = (
            "the alternative" if accept_h1_now <= accept_h0_now else "the null"
        )
        return Boundaries(a=0.0, b=0.0), NonUniqueFlag(
            f"immediate acceptance of {which} costs no more than any "
            "interior test; the opposite boundary is arbitrary"
        )

    starts = [(0.0, 0.0), (1.0, 1.0), (-1.0, -1.0), (1.0, -1.0), (-1.0, 1.0)]
    best = None
    for u0, v0 in starts:
        res = minimize(
            lambda w: _interior_penalty(problem, spec, -math.exp(w[0]), math.exp(w[1])),
            x0=np.array([u0, v0]),
            method="Nelder-Mead",
            options={"xatol": 1e-8, "fatol": 1e-13, "maxiter": 600, "maxfev": 900},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or not np.all(np.isfinite(best.x)) or not math.isfinite(best.fun):
        raise NoConvergence("penalty minimization produced no finite candidate")

    a = -math.exp(best.x[0])
    b = math.exp(best.x[1])
    out = Boundaries(a=a, b=b)
    # Strict re-evaluation at the winner: a failure here is a real error,
    # not an explored-and-rejected corner.
    gamma_star = penalty(
        problem, Boundaries(a=min(a, -_EDGE), b=max(b, _EDGE)), spec
    )

    if accept_h1_now <= gamma_star + 1e-12:
        return out, NonUniqueFlag(
            "immediate acceptance of the alternative matches the interior "
            "penalty; the upper boundary is arbitrary"
        )
    if accept_h0_now <= gamma_star + 1e-12:
        return out, NonUniqueFlag(
            "immediate acceptance of the null matches the interior penalty; "
            "the lower boundary is arbitrary"
        )
    if a > -max(tol, 1e-6) or b < max(tol, 1e-6):
        return out, NonUniqueFlag("minimizer pinned at a boundary; not interior")

    # Local uniqueness probe: the penalty must rise in all four directions.
    probe = 1e-3
    for da, db in ((probe, 0.0), (-probe, 0.0), (0.0, probe), (0.0, -probe)):
        nearby = _interior_penalty(problem, spec, a + da, b + db)
        if nearby <= gamma_star + 1e-12:
            return out, NonUniqueFlag(
                f"penalty flat within 1e-12 along offset ({da:+.0e}, {db:+.0e})"
            )

    if not 0.0 < spec.prior < 1.0:
        return out, NonUniqueFlag("degenerate prior admits no posterior mapping")
    return out, posterior_boundaries(out, spec.prior)


def posterior_boundaries(bounds: Boundaries, prior: float) -> PosteriorBoundaries:
    """Map log-likelihood boundaries to posterior-probability thresholds.

    Inverts ``x = logit(x*) + log((1-pi)/pi)`` for both coordinates, i.e.
    ``x* = logistic(x - log((1-pi)/pi))``; round-trips with the forward map
    to full precision.
    """
    if not 0.0 < prior < 1.0:
        raise ValidationError(f"prior must lie strictly in (0,1), got {prior}")
    offset = math.log((1.0 - prior) / prior)

    def logistic(x: float) -> float:
        return 0.5 * (1.0 + math.tanh(0.5 * x))

    return PosteriorBoundaries(
        a_star=logistic(bounds.a - offset), b_star=logistic(bounds.b - offset)
    )
