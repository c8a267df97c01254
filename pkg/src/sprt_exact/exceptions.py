"""Exception hierarchy for sprt_exact.

Input-validation failures derive from :class:`ValidationError`, numerical
breakdowns from :class:`NumericalError`.  The CLI maps the former to exit
code 2 and the latter to exit code 3.
"""


class SprtExactError(Exception):
    """Base class for all package errors."""


class ValidationError(SprtExactError, ValueError):
    """Rejected input (bad model data, bad targets, bad parameters)."""


class NonStochasticInitial(ValidationError):
    """Initial vector has negative mass or does not sum to one."""


class NotSubgenerator(ValidationError):
    """Transition-rate matrix violates the subgenerator sign pattern."""


class SingularGenerator(ValidationError):
    """Rate matrix is singular: the underlying chain is not transient."""


class DegenerateTargets(ValidationError):
    """Error targets with alpha0 + alpha1 >= 1 admit no sensible test."""


class NumericalError(SprtExactError, ArithmeticError):
    """A numerical procedure failed to produce a trustworthy result."""


class SeriesOverflow(NumericalError):
    """Scale-function series cancels or overflows beyond float range.

    Raised in the small-jump regime where the number of series terms grows
    so large that no significant digits survive the alternating sum.
    """


class InversionDiverged(NumericalError):
    """Transform inversion missed its accuracy target within budget."""


class SingularTransform(NumericalError):
    """Transform matrix singular at a quadrature node (abscissa too small)."""


class IllConditionedSolve(NumericalError):
    """Linear solve against a scale matrix lost all significant digits."""


class ScaleEvaluationFailed(NumericalError):
    """Scale-function evaluation failed for the requested argument."""


class OutsideOptimalityRegion(NumericalError):
    """No interior boundary pair achieves the requested error targets."""


class NoConvergence(NumericalError):
    """Iterative search exhausted its budget without converging."""


class AllCapped(NumericalError):
    """Every simulation replication hit the step cap; parameters are off."""
