"""Matrix-valued scale functions of the renewal risk process with drift.

The underlying process moves up with constant slope ``theta`` and takes
deterministic downward jumps of size ``d`` at renewal epochs whose
interarrival law is phase-type; the phase of the current interarrival time
is tracked as a background Markov chain.  Optionally the process is killed
just before each jump with probability ``1 - z``.  The pair is a Markov
additive process without positive jumps whose matrix exponent is

    F(s) = T + theta*s*I + t nu z exp(-d s),

and its scale function ``W(x)`` is the matrix function with Laplace
transform ``F(s)^{-1}``.  Two evaluation routes are provided:

* :func:`erlang_w` / :func:`erlang_w_integral` -- closed-form series for
  canonical Erlang interarrivals (unit slope), with a compensated
  log-magnitude summation that detects catastrophic cancellation;
* :func:`general_w` -- damped-contour numerical transform inversion with
  binomial (Euler) series acceleration for arbitrary phase-type input,
  escalating to arbitrary precision when double arithmetic is not enough.

``Z(x) = I - (int_0^x W) F(0)`` is the companion function used for the
sample-count transform.  All functions are pure; evaluations at different
arguments are independent.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass

import mpmath as mp
import numpy as np
from scipy.optimize import brentq
from scipy.special import gammaln

from .exceptions import (
    InversionDiverged,
    SeriesOverflow,
    SingularTransform,
    ValidationError,
)
from .phasetype import PhaseTypeDist

# Series terms past this point are numerically meaningless in double precision.
SERIES_MAX_TERMS = 100_000

# The term-wise antiderivative costs O(n K^2) work; past these lengths the
# evaluation would stall long after the series has lost all meaning.
INTEGRAL_MAX_TERMS = 20_000
INTEGRAL_MAX_TERMS_MP = 5_000

# Relative cancellation (sum of magnitudes over magnitude of the sum) beyond
# which no significant digit survives and the series must fail loudly.
CANCEL_LIMIT = 1e15

_LOG_HUGE = 709.0  # log of the float64 overflow threshold

# mpmath working precision is process-global; every arbitrary-precision
# section takes this lock so that evaluations stay pure under threading.
MP_LOCK = threading.RLock()


@dataclass(frozen=True)
class MapModel:
    """Drift-and-jump model: PH interarrivals, slope, jump size, survival.

    ``z = 1`` means no killing; ``z < 1`` kills the process just before each
    jump with probability ``1 - z``.
    """

    ph: PhaseTypeDist
    theta: float
    d: float
    z: float = 1.0

    def __post_init__(self):
        if self.theta <= 0.0:
            raise ValidationError(f"slope must be positive, got {self.theta}")
        if self.d <= 0.0:
            raise ValidationError(f"jump size must be positive, got {self.d}")
        if not 0.0 < self.z <= 1.0:
            raise ValidationError(f"survival probability must be in (0,1], got {self.z}")


def f_matrix(model: MapModel, s) -> np.ndarray:
    """Matrix exponent ``T + theta*s*I + t nu z exp(-d s)``; accepts complex s."""
    ph = model.ph
    eye = np.eye(ph.n)
    return ph.T + model.theta * s * eye + np.outer(ph.t, ph.nu) * (
        model.z * np.exp(-model.d * s)
    )


# ---------------------------------------------------------------------------
# Closed-form Erlang series (unit slope)
# ---------------------------------------------------------------------------


def _series_length(x: float, d: float) -> int:
    K = int(math.floor(x / d))
    if K > SERIES_MAX_TERMS:
        raise SeriesOverflow(
            f"scale series needs {K} terms (> {SERIES_MAX_TERMS}); "
            "the jump size is too small for a meaningful double-precision sum"
        )
    return K


def _cancel_limit(L: float) -> float:
    """Largest trustworthy cancellation ratio for terms of log-magnitude L.

    Each term carries a relative rounding error of order ``L * eps`` from
    the log-space evaluation, so once the summed magnitudes exceed the sum
    by more than ~0.05 / (L * eps) the result is pure noise; the flat cap
    covers the benign small-term regime.
    """
    return min(CANCEL_LIMIT, 0.05 / (max(L, 1.0) * 2.2e-16))


def _check_erlang_args(lam: float, d: float, n: int, z: float, x: float) -> None:
    if lam <= 0.0 or d <= 0.0 or n < 1 or int(n) != n:
        raise ValidationError(
            f"need lam > 0, d > 0 and an integer n >= 1; got {(lam, d, n)}"
        )
    if not 0.0 < z <= 1.0:
        raise ValidationError(f"survival probability must be in (0,1], got {z}")
    if x < 0.0:
        raise ValidationError(f"scale argument must be nonnegative, got {x}")


def _signed_exp_sum(
    logmag: np.ndarray, signs: np.ndarray, context: str
) -> tuple[float, float]:
    """Sum signed terms given in log-magnitude form, guarding cancellation.

    Rescales by the largest magnitude, accumulates with exact (fsum)
    summation and raises SeriesOverflow when the result either cannot be
    represented in double precision or has lost all significant digits to
    cancellation.  Returns ``(value, cancellation)`` where cancellation is
    the ratio of summed magnitudes to the magnitude of the sum.
    """
    finite = logmag > -np.inf
    if not np.any(finite):
        return 0.0, 1.0
    L = float(logmag[finite].max())
    scaled = np.zeros_like(logmag)
    scaled[finite] = np.exp(logmag[finite] - L)
    total = math.fsum(scaled * signs)
    magnitude = math.fsum(scaled)
    if total == 0.0 or magnitude > _cancel_limit(L) * abs(total):
        raise SeriesOverflow(
            f"catastrophic cancellation in {context}: "
            f"term mass {magnitude:.3e} against sum {total:.3e} after rescaling"
        )
    log_result = L + math.log(abs(total))
    if log_result > _LOG_HUGE:
        raise SeriesOverflow(f"{context} exceeds the double-precision range")
    return math.copysign(math.exp(log_result), total), magnitude / abs(total)


def _w_offset_series(
    lam: float, d: float, n: int, z: float, x: float, off: int, K: int
) -> tuple[float, float]:
    """One diagonal-offset entry of the Erlang scale matrix.

    Sums ``z^k g(lam (x - d k), k n + off)`` for ``k`` from ``1`` (below the
    diagonal, ``off < 0``) or ``0`` (otherwise) up to ``floor(x/d)``, where
    ``g(y, m) = (-y)^m / m! * exp(y)``.  Returns ``(value, cancellation)``.
    """
    k0 = 1 if off < 0 else 0
    if K < k0:
        return 0.0, 1.0
    ks = np.arange(k0, K + 1)
    ys = lam * (x - d * ks)
    ms = ks * n + off
    logmag = np.full(ks.shape, -np.inf)
    pos = ys > 0.0
    logmag[pos] = (
        ms[pos] * np.log(ys[pos]) - gammaln(ms[pos] + 1.0) + ys[pos]
    )
    logmag[~pos & (ms == 0)] = 0.0
    if z < 1.0:
        logmag += ks * math.log(z)
    signs = 1.0 - 2.0 * (ms % 2)
    return _signed_exp_sum(logmag, signs, "scale-function series")


def erlang_w_with_cancellation(
    lam: float, d: float, n: int, z: float, x: float
) -> tuple[np.ndarray, float]:
    """As :func:`erlang_w`, also reporting the worst cancellation ratio.

    The ratio (summed term magnitudes over result magnitude) bounds the
    relative rounding loss; callers use it to decide when to escalate to
    arbitrary precision.
    """
    _check_erlang_args(lam, d, n, z, x)
    K = _series_length(x, d)
    by_offset = {
        off: _w_offset_series(lam, d, n, z, x, off, K)
        for off in range(-(n - 1), n)
    }
    W = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            W[i, j] = by_offset[j - i][0]
    cancel = max(v[1] for v in by_offset.values())
    return W, cancel


def erlang_w(lam: float, d: float, n: int, z: float, x: float) -> np.ndarray:
    """Closed-form scale matrix for Erlang(n, lam) interarrivals, unit slope.

    Entry ``(i, j)`` is a finite series of ``floor(x/d) + 1`` terms in the
    functions ``g(y, m) = (-y)^m / m! * exp(y)``; killing multiplies the
    k-th term by ``z^k``.  ``W(0)`` is the identity.

    Raises
    ------
    SeriesOverflow
        When the series is too long, overflows the double range, or cancels
        catastrophically (the small-jump failure regime).
    """
    return erlang_w_with_cancellation(lam, d, n, z, x)[0]


def _w_integral_offset_series(
    lam: float, d: float, n: int, z: float, x: float, off: int, K: int
) -> tuple[float, float]:
    """One diagonal-offset entry of ``int_0^x W(y) dy`` for the Erlang form.

    Uses the term-wise antiderivative ``int_0^Y g(v, m) dv =
    sum_{r=0}^{m} g(Y, r) - 1`` with the change of variable ``v = lam (y - d k)``.
    Returns ``(value, cancellation)``.
    """
    k0 = 1 if off < 0 else 0
    if K < k0:
        return 0.0, 1.0
    log_z = math.log(z) if z < 1.0 else 0.0

    # Exact maxima of the log term magnitudes, used to rescale before summing:
    # log g(y, r) over r in [0, m] peaks at r ~ y.
    ks = np.arange(k0, K + 1)
    ys = lam * (x - d * ks)
    ms = ks * n + off
    peaks = ks * log_z  # y == 0 rows contribute only the unit terms
    pos = ys > 0.0
    r_star = np.minimum(ms[pos], np.floor(ys[pos])).astype(float)
    peaks[pos] = (
        r_star * np.log(ys[pos]) - gammaln(r_star + 1.0) + ys[pos] + ks[pos] * log_z
    )
    L = float(np.max(peaks))

    partials = []
    magnitude = 0.0
    for idx, k in enumerate(ks):
        y = ys[idx]
        m = ms[idx]
        if y <= 0.0:
            continue  # the antiderivative over an empty range is exactly zero
        base = k * log_z
        r = np.arange(m + 1)
        logg = r * math.log(y) - gammaln(r + 1.0) + y + base
        scaled = np.exp(logg - L) * (1.0 - 2.0 * (r % 2))
        unit = math.exp(base - L)  # the "- 1" of the antiderivative, rescaled
        partials.append(math.fsum(scaled) - unit)
        magnitude += float(np.abs(scaled).sum()) + unit

    total = math.fsum(partials)
    if total == 0.0:
        if magnitude == 0.0:
            return 0.0, 1.0
        raise SeriesOverflow("catastrophic cancellation in scale-integral series")
    if magnitude > _cancel_limit(L) * abs(total):
        raise SeriesOverflow(
            f"catastrophic cancellation in scale-integral series: "
            f"term mass {magnitude:.3e} against sum {total:.3e}"
        )
    log_result = L + math.log(abs(total)) - math.log(lam)
    if log_result > _LOG_HUGE:
        raise SeriesOverflow("scale-integral series exceeds the double range")
    return math.copysign(math.exp(log_result), total), magnitude / abs(total)


def erlang_w_integral_with_cancellation(
    lam: float, d: float, n: int, z: float, x: float
) -> tuple[np.ndarray, float]:
    """As :func:`erlang_w_integral`, also reporting the cancellation ratio."""
    _check_erlang_args(lam, d, n, z, x)
    K = _series_length(x, d)
    if K > INTEGRAL_MAX_TERMS:
        raise SeriesOverflow(
            f"scale-integral series needs {K} terms (> {INTEGRAL_MAX_TERMS})"
        )
    by_offset = {
        off: _w_integral_offset_series(lam, d, n, z, x, off, K)
        for off in range(-(n - 1), n)
    }
    IW = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            IW[i, j] = by_offset[j - i][0]
    cancel = max(v[1] for v in by_offset.values())
    return IW, cancel


def erlang_w_integral(lam: float, d: float, n: int, z: float, x: float) -> np.ndarray:
    """Entrywise ``int_0^x W(y) dy`` for the Erlang closed form, unit slope."""
    return erlang_w_integral_with_cancellation(lam, d, n, z, x)[0]


# ---------------------------------------------------------------------------
# Arbitrary-precision twins of the Erlang series (no rescaling needed)
# ---------------------------------------------------------------------------


def erlang_w_mp(lam, d, n: int, z, x) -> mp.matrix:
    """Erlang scale matrix evaluated in the current mpmath precision."""
    lam, d, z, x = mp.mpf(lam), mp.mpf(d), mp.mpf(z), mp.mpf(x)
    K = int(mp.floor(x / d))
    if K > SERIES_MAX_TERMS:
        raise SeriesOverflow(f"scale series needs {K} terms")
    vals = {}
    for off in range(-(n - 1), n):
        k0 = 1 if off < 0 else 0
        s = mp.mpf(0)
        for k in range(k0, K + 1):
            y = lam * (x - d * k)
            m = k * n + off
            s += z**k * (-y) ** m / mp.factorial(m) * mp.exp(y)
        vals[off] = s
    W = mp.zeros(n)
    for i in range(n):
        for j in range(n):
            W[i, j] = vals[j - i]
    return W


def erlang_w_integral_mp(lam, d, n: int, z, x) -> mp.matrix:
    """Erlang scale integral evaluated in the current mpmath precision."""
    lam, d, z, x = mp.mpf(lam), mp.mpf(d), mp.mpf(z), mp.mpf(x)
    K = int(mp.floor(x / d))
    if K > INTEGRAL_MAX_TERMS_MP:
        raise SeriesOverflow(
            f"scale-integral series needs {K} terms (> {INTEGRAL_MAX_TERMS_MP})"
        )
    vals = {}
    for off in range(-(n - 1), n):
        k0 = 1 if off < 0 else 0
        s = mp.mpf(0)
        for k in range(k0, K + 1):
            y = lam * (x - d * k)
            m = k * n + off
            term = mp.exp(y)
            inner = term
            for r in range(1, m + 1):
                term *= -y / r
                inner += term
            s += z**k * (inner - 1)
        vals[off] = s / lam
    IW = mp.zeros(n)
    for i in range(n):
        for j in range(n):
            IW[i, j] = vals[j - i]
    return IW


# ---------------------------------------------------------------------------
# Damped-contour transform inversion for general phase-type input
# ---------------------------------------------------------------------------


def _dominance_abscissa(model: MapModel) -> float:
    """Real part beyond which F(s) is strictly diagonally dominant.

    Every singularity of ``F(s)^{-1}`` (real or complex) lies strictly to the
    left of the returned value.
    """
    ph = model.ph
    return float(np.max(2.0 * np.abs(np.diag(ph.T)) + ph.t) / model.theta)


def rightmost_root(model: MapModel) -> float:
    """Rightmost real zero of ``det F(s)``; governs the growth of W.

    Returns 0.0 when no real zero is found (possible only with killing).
    """
    hi = _dominance_abscissa(model) + 0.5
    lo = -hi - 5.0
    grid = np.linspace(lo, hi, 4001)
    mats = np.stack([f_matrix(model, s) for s in grid])
    dets = np.linalg.det(mats)
    sign_flip = np.nonzero(np.sign(dets[:-1]) * np.sign(dets[1:]) < 0)[0]
    if sign_flip.size == 0:
        return 0.0
    i = int(sign_flip[-1])
    root = brentq(
        lambda s: float(np.linalg.det(f_matrix(model, s))),
        grid[i],
        grid[i + 1],
        xtol=1e-12,
    )
    return float(root)


def _cf_eval(fp, t, T, gamma, M, is_mp: bool):
    """Evaluate the accelerated Fourier series for one transform entry.

    ``fp`` holds the transform values at the ``2M + 1`` contour nodes.  The
    quotient-difference scheme turns the damped trapezoid series into a
    continued fraction whose diagonal rational approximant is evaluated at
    ``z = exp(i pi t / T)``, with the standard improved remainder for the
    last convergent.
    """
    NP = 2 * M + 1
    if is_mp:
        zeros = lambda shape: np.full(shape, mp.mpc(0), dtype=object)
        expf, sqrtf = mp.exp, mp.sqrt
        one = mp.mpf(1)
    else:
        zeros = lambda shape: np.zeros(shape, dtype=complex)
        expf, sqrtf = np.exp, np.sqrt
        one = 1.0
    e = zeros((NP, M + 1))
    q = zeros((NP, M))
    d = zeros(NP)
    A = zeros(NP + 2)
    B = zeros(NP + 2)

    q[0, 0] = fp[1] / (fp[0] / 2)
    for i in range(1, 2 * M):
        q[i, 0] = fp[i + 1] / fp[i]
    for r in range(1, M + 1):
        mr = 2 * (M - r)
        for i in range(mr + 1):
            e[i, r] = q[i + 1, r - 1] - q[i, r - 1] + e[i + 1, r - 1]
        if r != M:
            for i in range(2 * (M - r - 1) + 2):
                q[i, r] = q[i + 1, r - 1] * e[i + 1, r] / e[i, r]

    d[0] = fp[0] / 2
    for r in range(1, M + 1):
        d[2 * r - 1] = -q[0, r - 1]
        d[2 * r] = -e[0, r]

    A[1] = d[0]
    B[0] = one
    B[1] = one
    zz = expf(1j * (mp.pi if is_mp else math.pi) * t / T)
    for i in range(1, 2 * M):
        A[i + 1] = A[i] + d[i] * A[i - 1] * zz
        B[i + 1] = B[i] + d[i] * B[i - 1] * zz
    brem = (one + (d[2 * M - 1] - d[2 * M]) * zz) / 2
    rem = -brem * (one - sqrtf(one + d[2 * M] * zz / brem**2))
    A[NP] = A[2 * M] + rem * A[2 * M - 1]
    B[NP] = B[2 * M] + rem * B[2 * M - 1]
    val = expf(gamma * t) / T * (A[NP] / B[NP])
    return val.real


def _dehoog_float(model, x, alpha, tol, M, integral):
    """Float64 damped-contour inversion; returns results at orders M and M-12.

    Both orders reuse the same contour nodes (they depend only on ``alpha``,
    ``tol`` and the period), so the pair costs one set of matrix solves and
    the difference gives a per-entry accuracy estimate.
    """
    n = model.ph.n
    T = 2.0 * x
    gamma = alpha - math.log(tol) / (2.0 * T)
    if gamma * x > _LOG_HUGE - 20.0:
        raise InversionDiverged("damping abscissa too large for double range")
    nodes = gamma + 1j * math.pi * np.arange(2 * M + 1) / T
    stack = np.empty((nodes.size, n, n), dtype=complex)
    eye = np.eye(n)
    for k, s in enumerate(nodes):
        try:
            stack[k] = np.linalg.solve(f_matrix(model, s), eye)
        except np.linalg.LinAlgError as exc:
            raise SingularTransform(
                f"transform matrix singular at node {s!r}; abscissa too small"
            ) from exc
        if integral:
            stack[k] /= s
    out = np.empty((2, n, n))
    with np.errstate(all="ignore"):  # QD breakdowns surface as non-finite output
        for which, order in enumerate((M, M - 12)):
            for i in range(n):
                for j in range(n):
                    fp = stack[: 2 * order + 1, i, j]
                    if np.max(np.abs(fp)) == 0.0:
                        out[which, i, j] = 0.0
                    else:
                        out[which, i, j] = _cf_eval(fp, x, T, gamma, order, is_mp=False)
    return out[0], out[1]


def _dehoog_mp(model, x, alpha, tol, M, integral, dps):
    """Arbitrary-precision twin of :func:`_dehoog_float`."""
    n = model.ph.n
    with MP_LOCK, mp.workdps(dps):
        x_mp = mp.mpf(x)
        T = 2 * x_mp
        gamma = mp.mpf(alpha) - mp.log(tol) / (2 * T)
        T_np = model.ph.T
        outer = np.outer(model.ph.t, model.ph.nu)
        theta = mp.mpf(model.theta)
        dd = mp.mpf(model.d)
        zz = mp.mpf(model.z)
        stack = []
        for k in range(2 * M + 1):
            s = gamma + 1j * mp.pi * k / T
            Fs = mp.zeros(n)
            esd = zz * mp.exp(-dd * s)
            for i in range(n):
                for j in range(n):
                    Fs[i, j] = T_np[i, j] + outer[i, j] * esd
                Fs[i, i] += theta * s
            try:
                inv = Fs**-1
            except ZeroDivisionError as exc:
                raise SingularTransform(f"transform singular at node {s}") from exc
            if integral:
                inv = inv / s
            stack.append(inv)
        results = []
        for order in (M, M - 12):
            W = np.empty((n, n))
            for i in range(n):
                for j in range(n):
                    fp = [stack[k][i, j] for k in range(2 * order + 1)]
                    W[i, j] = float(_cf_eval(fp, x_mp, T, gamma, order, is_mp=True))
            results.append(W)
    return results[0], results[1]


def _invert_transform(model: MapModel, x: float, rel_tol: float, integral: bool) -> np.ndarray:
    if x <= 0.0:
        raise ValidationError(f"transform inversion needs x > 0, got {x}")
    phi = rightmost_root(model)
    alpha = max(phi, 0.0)
    tol = max(min(rel_tol * 1e-2, 1e-12), 1e-14)

    try:
        W_hi, W_lo = _dehoog_float(model, x, alpha, tol, M=40, integral=integral)
        err = float(np.max(np.abs(W_hi - W_lo)))
        scale = max(1.0, float(np.max(np.abs(W_hi))))
        if np.all(np.isfinite(W_hi)) and err <= rel_tol * scale:
            return W_hi
    except (InversionDiverged, SingularTransform, FloatingPointError):
        pass  # retried below on a safer contour

    # Double precision was not enough: repeat with working precision matched
    # to the damping amplification, then once more on the rigorously safe
    # diagonal-dominance contour.
    digits = -math.log10(rel_tol)
    failure = "no finite result"
    for alpha_mp in (alpha, _dominance_abscissa(model) + 0.5):
        dps = 30 + int(alpha_mp * x / math.log(10.0)) + int(1.5 * digits)
        try:
            W_hi, W_lo = _dehoog_mp(
                model, x, alpha_mp, rel_tol * 1e-4, M=70, integral=integral, dps=dps
            )
        except ZeroDivisionError:
            failure = "quotient-difference breakdown"
            continue
        if not np.all(np.isfinite(W_hi)):
            continue
        err = float(np.max(np.abs(W_hi - W_lo)))
        scale = max(1.0, float(np.max(np.abs(W_hi))))
        if err <= rel_tol * scale:
            return W_hi
        failure = f"error estimate {err:.3e} above target {rel_tol:.1e} * {scale:.3e}"
    raise InversionDiverged(f"transform inversion failed at x={x}: {failure}")


def general_w(model: MapModel, x: float, rel_tol: float = 1e-8) -> np.ndarray:
    """Scale matrix by numerical inversion of ``s -> F(s)^{-1}``.

    Works for any valid phase-type interarrival law.  The contour is damped
    to the right of every singularity of the transform; accuracy is
    estimated by comparing two acceleration orders and the computation is
    retried in arbitrary precision before giving up.

    Raises
    ------
    InversionDiverged
        Accuracy target not met within the precision budget.
    SingularTransform
        Transform matrix singular at a required node.
    """
    return _invert_transform(model, x, rel_tol, integral=False)


def general_w_integral(model: MapModel, x: float, rel_tol: float = 1e-8) -> np.ndarray:
    """``int_0^x W(y) dy`` by inverting ``F(s)^{-1} / s``."""
    return _invert_transform(model, x, rel_tol, integral=True)


# ---------------------------------------------------------------------------
# Evaluator facade
# ---------------------------------------------------------------------------

ERLANG_CLOSED_FORM = "erlang-closed-form"
TRANSFORM_INVERSION = "transform-inversion"


@dataclass(frozen=True)
class ScaleMatrix:
    """Scale-function evaluator bound to one model.

    ``method`` records the evaluation route: the closed-form series for
    canonical Erlang interarrivals, transform inversion otherwise.  For a
    slope ``theta != 1`` the Erlang route rescales to the unit-slope model
    (rate ``lam / theta``) and divides by ``theta``; ``W(0) = I / theta``.
    """

    model: MapModel
    method: str
    rel_tol: float = 1e-8

    def w(self, x: float) -> np.ndarray:
        if self.method == ERLANG_CLOSED_FORM:
            ph = self.model.ph
            return (
                erlang_w(
                    ph.erlang_rate / self.model.theta,
                    self.model.d,
                    ph.n,
                    self.model.z,
                    x,
                )
                / self.model.theta
            )
        if x == 0.0:
            return np.eye(self.model.ph.n) / self.model.theta
        return general_w(self.model, x, self.rel_tol)

    def w_integral(self, x: float) -> np.ndarray:
        if self.method == ERLANG_CLOSED_FORM:
            ph = self.model.ph
            return (
                erlang_w_integral(
                    ph.erlang_rate / self.model.theta,
                    self.model.d,
                    ph.n,
                    self.model.z,
                    x,
                )
                / self.model.theta
            )
        if x == 0.0:
            return np.zeros((self.model.ph.n, self.model.ph.n))
        return general_w_integral(self.model, x, self.rel_tol)

    def z_mat(self, x: float) -> np.ndarray:
        return np.eye(self.model.ph.n) - self.w_integral(x) @ f_matrix(self.model, 0.0)


def scale_matrix(model: MapModel, rel_tol: float = 1e-8) -> ScaleMatrix:
    """Choose the evaluation route for the model and wrap it."""
    method = (
        ERLANG_CLOSED_FORM
        if model.ph.erlang_rate is not None
        else TRANSFORM_INVERSION
    )
    return ScaleMatrix(model=model, method=method, rel_tol=rel_tol)


def z_matrix(model: MapModel, x: float, rel_tol: float = 1e-8) -> np.ndarray:
    """``Z(x) = I - (int_0^x W(y) dy) F(0)`` for the killed model.

    With no killing ``F(0)`` has zero row sums, so ``Z(x) 1 = 1`` for all x.
    """
    if x < 0.0:
        raise ValidationError(f"argument must be nonnegative, got {x}")
    return scale_matrix(model, rel_tol).z_mat(x)


def segment_quadrature(fun, X: float, d: float, order: int = 32) -> np.ndarray:
    """Gauss-Legendre integral of a matrix function over [0, X].

    Scale functions are piecewise analytic with derivative kinks at integer
    multiples of the jump size, so the integration is split at those points
    and each segment gets a fixed-order rule.
    """
    if X < 0.0:
        raise ValidationError(f"integration bound must be nonnegative, got {X}")
    edges = np.append(np.arange(0.0, X, d), X)
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = None
    for e0, e1 in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (e0 + e1), 0.5 * (e1 - e0)
        for u, w in zip(nodes, weights):
            piece = (w * half) * np.asarray(fun(mid + half * u))
            total = piece if total is None else total + piece
    if total is None:  # X == 0
        return np.zeros_like(np.asarray(fun(0.0)))
    return total


def tilted_w(w0_eval: ScaleMatrix, delta: np.ndarray, x: float) -> np.ndarray:
    """Scale matrix of the tilted model from the original one.

    The two matrix exponents are similar up to a unit shift in the argument,
    which turns into ``W1(x) = exp(x) D^{-1} W0(x) D`` with ``D`` the tilt
    diagonal.  Requires the jump size of ``w0_eval.model`` to be the
    log-likelihood jump ``-log G(theta)`` of the tilt.
    """
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0.0) or np.any(delta >= 1.0):
        raise ValidationError("tilt diagonal entries must lie in (0, 1)")
    if x < 0.0:
        raise ValidationError(f"argument must be nonnegative, got {x}")
    W0 = w0_eval.w(x)
    return math.exp(x) * (W0 * np.outer(1.0 / delta, delta))
