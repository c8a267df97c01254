"""Phase-type distributions: validation, evaluation, tilting, sampling.

A phase-type (PH) law is the absorption time of a transient Markov chain on
``n`` phases.  It is parametrized by the initial probability row vector ``nu``
and the subgenerator matrix ``T``; the exit-rate vector is ``t = -T @ 1``.
The density is ``nu @ expm(T x) @ t``.

Exponential tilting with parameter ``theta > 0`` multiplies the density by
``exp(-theta x) / G(theta)`` where ``G`` is the Laplace-Stieltjes transform.
The tilted law is again phase-type; :func:`tilt` returns its parameters
together with the tilt diagonal and the jump size ``d = -log G(theta)`` of
the associated log-likelihood random walk.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .exceptions import (
    NonStochasticInitial,
    NotSubgenerator,
    SingularGenerator,
    ValidationError,
)

# Absolute tolerance on probability mass and row sums (double-precision floor).
MASS_TOL = 1e-12

# Condition number past which the subgenerator is treated as singular.
_SINGULAR_COND = 1e14


@dataclass(frozen=True)
class PhaseTypeDist:
    """Validated phase-type distribution.

    Instances are immutable; build them through :func:`validate` or
    :func:`erlang`, never directly.

    Attributes
    ----------
    nu : ndarray, shape (n,)
        Initial probability vector, nonnegative, sums to one.
    T : ndarray, shape (n, n)
        Subgenerator: nonnegative off-diagonal, negative diagonal,
        nonpositive row sums, nonsingular.
    t : ndarray, shape (n,)
        Exit rates ``-T @ 1``.
    erlang_rate : float or None
        Set to the rate when ``(nu, T)`` is the canonical Erlang form
        (``nu = e1``, constant bidiagonal ``T``); enables closed-form paths.
    """

    nu: np.ndarray
    T: np.ndarray
    t: np.ndarray
    erlang_rate: float | None = None

    @property
    def n(self) -> int:
        return self.T.shape[0]

    def mean(self) -> float:
        """Expected absorption time ``-nu @ T^{-1} @ 1``."""
        return -float(self.nu @ np.linalg.solve(self.T, np.ones(self.n)))


@dataclass(frozen=True)
class TiltResult:
    """Outcome of exponentially tilting a PH law.

    Attributes
    ----------
    tilted : PhaseTypeDist
        The tilted distribution.
    delta : ndarray, shape (n,)
        Diagonal of the tilt matrix ``(theta I - T)^{-1} t``; every entry
        lies strictly in (0, 1).
    g0_theta : float
        Transform value ``G(theta)`` of the original law, in (0, 1).
    d : float
        Jump size ``-log G(theta) > 0`` of the log-likelihood walk.
    """

    tilted: PhaseTypeDist
    delta: np.ndarray
    g0_theta: float
    d: float


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.flags.writeable = False
    return a


def _detect_erlang(nu: np.ndarray, T: np.ndarray) -> float | None:
    """Return the rate if (nu, T) is the canonical Erlang form, else None."""
    n = T.shape[0]
    if abs(nu[0] - 1.0) > MASS_TOL or np.any(np.abs(nu[1:]) > MASS_TOL):
        return None
    lam = -T[0, 0]
    ref = -lam * np.eye(n)
    idx = np.arange(n - 1)
    ref[idx, idx + 1] = lam
    if np.max(np.abs(T - ref)) > 1e-12 * max(lam, 1.0):
        return None
    return float(lam)


def validate(nu, T) -> PhaseTypeDist:
    """Check raw (nu, T) data and return an immutable PhaseTypeDist.

    Raises
    ------
    NonStochasticInitial
        If ``nu`` has negative mass or does not sum to one.
    NotSubgenerator
        If ``T`` violates the subgenerator sign pattern or row sums.
    SingularGenerator
        If ``T`` is singular, i.e. the chain can avoid absorption.
    """
    nu = np.asarray(nu, dtype=float).reshape(-1)
    T = np.asarray(T, dtype=float)
    if T.ndim != 2 or T.shape[0] != T.shape[1]:
        raise ValidationError(f"T must be square, got shape {T.shape}")
    n = T.shape[0]
    if nu.shape[0] != n:
        raise ValidationError(f"nu has length {nu.shape[0]}, T is {n}x{n}")

    if np.any(nu < -MASS_TOL):
        raise NonStochasticInitial("nu has negative entries")
    if abs(nu.sum() - 1.0) > MASS_TOL:
        raise NonStochasticInitial(f"nu sums to {nu.sum()!r}, expected 1")

    # Row-sum tolerance scales with the rate magnitude: double arithmetic
    # cannot place the sums closer to zero than ~eps times the rates.
    rate_scale = max(1.0, float(np.abs(np.diag(T)).max()) if T.size else 1.0)
    off = T - np.diag(np.diag(T))
    if np.any(off < -MASS_TOL * rate_scale):
        raise NotSubgenerator("negative off-diagonal rate in T")
    if np.any(np.diag(T) >= 0.0):
        raise NotSubgenerator("nonnegative diagonal entry in T")
    row_sums = T.sum(axis=1)
    if np.any(row_sums > MASS_TOL * rate_scale):
        raise NotSubgenerator("positive row sum in T")

    if np.linalg.cond(T) > _SINGULAR_COND:
        raise SingularGenerator("T is singular; the chain is not transient")

    t = np.clip(-row_sums, 0.0, None)
    if not np.any(t > MASS_TOL):
        raise SingularGenerator("exit-rate vector is zero; no absorption")

    nu = np.clip(nu, 0.0, None)
    return PhaseTypeDist(
        nu=_freeze(nu), T=_freeze(T), t=_freeze(t), erlang_rate=_detect_erlang(nu, T)
    )


def erlang(n: int, lam: float) -> PhaseTypeDist:
    """Canonical Erlang(n, lam): ``nu = e1``, bidiagonal subgenerator."""
    if n < 1 or int(n) != n:
        raise ValidationError(f"Erlang phase count must be a positive integer, got {n}")
    if lam <= 0.0:
        raise ValidationError(f"Erlang rate must be positive, got {lam}")
    n = int(n)
    T = -lam * np.eye(n)
    idx = np.arange(n - 1)
    T[idx, idx + 1] = lam
    nu = np.zeros(n)
    nu[0] = 1.0
    return validate(nu, T)


def density(ph: PhaseTypeDist, x: float) -> float:
    """Density ``nu @ expm(T x) @ t`` at ``x >= 0``.

    Dispatches to the closed Erlang form when available, avoiding the
    matrix exponential entirely.
    """
    if x < 0.0:
        raise ValidationError(f"density argument must be nonnegative, got {x}")
    lam = ph.erlang_rate
    if lam is not None:
        n = ph.n
        if x == 0.0:
            return lam if n == 1 else 0.0
        return float(
            math.exp(n * math.log(lam) + (n - 1) * math.log(x) - lam * x - math.lgamma(n))
        )
    return float(ph.nu @ expm(ph.T * x) @ ph.t)


def lst(ph: PhaseTypeDist, theta: float) -> float:
    """Laplace-Stieltjes transform ``nu @ (theta I - T)^{-1} @ t``.

    Equals 1 at ``theta = 0`` and decreases strictly in ``theta``.
    """
    if theta < 0.0:
        raise ValidationError(f"transform argument must be nonnegative, got {theta}")
    A = theta * np.eye(ph.n) - ph.T
    return float(ph.nu @ np.linalg.solve(A, ph.t))


def tilt(ph0: PhaseTypeDist, theta: float) -> TiltResult:
    """Exponentially tilt ``ph0`` with parameter ``theta > 0``.

    The tilted law has subgenerator ``D^{-1} T D - theta I``, initial vector
    ``nu D / G(theta)`` and exit rates ``D^{-1} t``, where ``D`` is the
    diagonal matrix of ``(theta I - T)^{-1} t``.  All diagonal entries of
    ``D`` lie in (0, 1), and the jump size is ``d = -log G(theta)``.
    """
    if theta <= 0.0:
        raise ValidationError(f"tilt parameter must be positive, got {theta}")
    A = theta * np.eye(ph0.n) - ph0.T
    try:
        delta = np.linalg.solve(A, ph0.t)
    except np.linalg.LinAlgError as exc:  # corrupted input; impossible for valid T
        raise SingularGenerator(f"(theta I - T) singular at theta={theta}") from exc
    if np.any(delta <= 0.0) or np.any(delta >= 1.0):
        raise SingularGenerator(
            "tilt diagonal escaped (0,1); input matrix is corrupted"
        )
    g0 = float(ph0.nu @ delta)
    T1 = ph0.T * np.outer(1.0 / delta, delta) - theta * np.eye(ph0.n)
    nu1 = ph0.nu * delta / g0
    tilted = validate(nu1, T1)
    return TiltResult(tilted=tilted, delta=_freeze(delta), g0_theta=g0, d=-math.log(g0))


def sample(ph: PhaseTypeDist, rng: np.random.Generator, size: int | None = None):
    """Draw from the PH law using the supplied random stream.

    Canonical Erlang inputs use the sum-of-exponentials (gamma) shortcut;
    general inputs simulate the absorbing chain.  Draws are reproducible
    given the generator state.  Returns a scalar when ``size`` is None,
    otherwise an array of length ``size``.
    """
    m = 1 if size is None else int(size)
    if ph.erlang_rate is not None:
        out = rng.gamma(shape=float(ph.n), scale=1.0 / ph.erlang_rate, size=m)
    else:
        out = _sample_chain(ph, rng, m)
    return float(out[0]) if size is None else out


def _sample_chain(ph: PhaseTypeDist, rng: np.random.Generator, m: int) -> np.ndarray:
    n = ph.n
    rates = -np.diag(ph.T)
    # Row i: jump probabilities to phases 0..n-1 then absorption, cumulated.
    P = np.empty((n, n + 1))
    P[:, :n] = ph.T / rates[:, None]
    np.fill_diagonal(P[:, :n], 0.0)
    P[:, n] = ph.t / rates
    cumP = np.cumsum(P, axis=1)
    cumP[:, n] = 1.0

    cum_nu = np.cumsum(ph.nu)
    cum_nu[-1] = 1.0
    state = np.searchsorted(cum_nu, rng.random(m), side="left")

    out = np.zeros(m)
    idx = np.arange(m)
    while idx.size:
        cur = state[idx]
        out[idx] += rng.exponential(1.0, idx.size) / rates[cur]
        nxt = (rng.random(idx.size)[:, None] >= cumP[cur]).sum(axis=1)
        absorbed = nxt == n
        state[idx[~absorbed]] = nxt[~absorbed]
        idx = idx[~absorbed]
    return out


def from_spec_dict(doc: dict) -> PhaseTypeDist:
    """Build a PH law from its JSON document form.

    Accepts ``{"nu": [...], "T": [[...], ...]}`` or the Erlang shortcut
    ``{"erlang": {"n": 2, "lambda": 1.0}}``.
    """
    if not isinstance(doc, dict):
        raise ValidationError("model document must be a JSON object")
    if "erlang" in doc:
        spec = doc["erlang"]
        try:
            return erlang(spec["n"], spec["lambda"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"bad erlang shortcut: {exc}") from exc
    if "nu" in doc and "T" in doc:
        return validate(doc["nu"], doc["T"])
    raise ValidationError('model document needs either "erlang" or "nu"+"T" keys')
