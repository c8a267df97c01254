"""Monte Carlo oracle for the sequential test.

Simulates the log-likelihood random walk ``Lambda_k = sum (theta zeta_i - d)``
under either hypothesis and tallies the decision, the sample count ``N``
(first ``k`` with ``Lambda_k <= a`` or ``Lambda_k >= b``) and ``z^N`` for
requested ``z``.  Every analytic formula in the package is validated against
these estimates.

Reproducibility: replications are partitioned into fixed-size blocks, each
owning a counter-based generator spawned deterministically from the seed.
Results are combined in block order, so distributing blocks over workers
produces bit-identical output to a sequential run with the same seed and
replication count; the implementation here processes blocks sequentially.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import AllCapped, ValidationError
from .phasetype import sample
from .sprt import Boundaries, Hypothesis, TestProblem, _check_hypothesis

_BLOCK = 1 << 14  # replications per generator block; part of the seed contract


@dataclass(frozen=True)
class SimConfig:
    replications: int
    seed: int
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.replications < 1:
            raise ValidationError(f"need at least one replication, got {self.replications}")
        if self.max_steps < 1:
            raise ValidationError(f"need at least one step, got {self.max_steps}")


class Estimate(NamedTuple):
    value: float
    se: float


@dataclass(frozen=True)
class SimResult:
    """Tallies of one simulation run.

    ``lower_exit`` / ``upper_exit`` estimate the probabilities of deciding
    for the alternative (walk at or below ``a``) and for the null (walk at
    or above ``b``).  ``alpha0_hat`` is populated under the null hypothesis,
    ``alpha1_hat`` under the alternative; the other is None.  Replications
    hitting the step cap are excluded from every estimate and reported in
    ``capped_count``.
    """

    hypothesis: str
    replications: int
    lower_exit: Estimate
    upper_exit: Estimate
    alpha0_hat: Estimate | None
    alpha1_hat: Estimate | None
    mean_n: Estimate
    pgf_at: dict[float, Estimate]
    capped_count: int


def _proportion(count: int, total: int) -> Estimate:
    p = count / total
    return Estimate(p, np.sqrt(p * (1.0 - p) / total))


def run(
    problem: TestProblem,
    bounds: Boundaries,
    hypothesis: Hypothesis,
    config: SimConfig,
    z_points: tuple[float, ...] = (),
) -> SimResult:
    """Simulate the test and estimate errors, mean sample count, and ``E z^N``.

    Raises AllCapped when every replication hits the step cap, which signals
    parameters under which the walk practically never exits.
    """
    _check_hypothesis(hypothesis)
    if not (bounds.a < 0.0 < bounds.b):
        raise ValidationError(f"simulation needs interior boundaries, got {bounds}")
    for z in z_points:
        if not 0.0 < z <= 1.0:
            raise ValidationError(f"z points must lie in (0, 1], got {z}")

    ph = problem.law(hypothesis)
    n_rep = config.replications
    blocks = (n_rep + _BLOCK - 1) // _BLOCK
    children = np.random.SeedSequence(config.seed).spawn(blocks)

    n_low = 0
    n_high = 0
    capped = 0
    sum_n = 0.0
    sum_n2 = 0.0
    z_arr = np.asarray(z_points, dtype=float)
    sum_z = np.zeros(z_arr.size)
    sum_z2 = np.zeros(z_arr.size)

    for b in range(blocks):
        m = min(_BLOCK, n_rep - b * _BLOCK)
        rng = np.random.Generator(np.random.Philox(children[b]))
        walk = np.zeros(m)
        alive = np.arange(m)
        n_steps = np.zeros(m, dtype=np.int64)
        went_low = np.zeros(m, dtype=bool)
        decided = np.zeros(m, dtype=bool)
        step = 0
        while alive.size and step < config.max_steps:
            step += 1
            zeta = sample(ph, rng, size=alive.size)
            walk[alive] += problem.theta * zeta - problem.d
            vals = walk[alive]
            low = vals <= bounds.a
            high = vals >= bounds.b
            done = low | high
            hit = alive[done]
            n_steps[hit] = step
            went_low[alive[low]] = True
            decided[hit] = True
            alive = alive[~done]

        capped += alive.size
        low_ct = int(np.count_nonzero(went_low))
        n_low += low_ct
        n_high += int(np.count_nonzero(decided)) - low_ct
        ns = n_steps[decided].astype(float)
        sum_n += float(ns.sum())
        sum_n2 += float((ns * ns).sum())
        if z_arr.size:
            zn = z_arr[None, :] ** ns[:, None]
            sum_z += zn.sum(axis=0)
            sum_z2 += (zn * zn).sum(axis=0)

    effective = n_rep - capped
    if effective == 0:
        raise AllCapped(
            f"all {n_rep} replications hit the {config.max_steps}-step cap"
        )

    lower = _proportion(n_low, effective)
    upper = _proportion(n_high, effective)
    mean_n = sum_n / effective
    var_n = max(sum_n2 / effective - mean_n * mean_n, 0.0)
    pgf = {}
    for i, z in enumerate(z_arr):
        mz = sum_z[i] / effective
        vz = max(sum_z2[i] / effective - mz * mz, 0.0)
        pgf[float(z)] = Estimate(mz, np.sqrt(vz / effective))

    return SimResult(
        hypothesis=hypothesis,
        replications=n_rep,
        lower_exit=lower,
        upper_exit=upper,
        alpha0_hat=lower if hypothesis == "H0" else None,
        alpha1_hat=upper if hypothesis == "H1" else None,
        mean_n=Estimate(mean_n, np.sqrt(var_n / effective)),
        pgf_at=pgf,
        capped_count=capped,
    )


def sample_path(
    problem: TestProblem, hypothesis: Hypothesis, steps: int, seed: int
) -> list[tuple[int, float]]:
    """Reproducible trajectory ``[(k, Lambda_k)]`` starting at ``(0, 0.0)``."""
    _check_hypothesis(hypothesis)
    if steps < 1:
        raise ValidationError(f"need at least one step, got {steps}")
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    ph = problem.law(hypothesis)
    zeta = sample(ph, rng, size=steps)
    walk = np.concatenate([[0.0], np.cumsum(problem.theta * zeta - problem.d)])
    return [(k, float(v)) for k, v in enumerate(walk)]
