"""Shared fixtures and independent oracles for the test suite."""

import numpy as np
import pytest
from scipy.linalg import expm

from sprt_exact import erlang, make_problem, validate


@pytest.fixture(scope="session")
def prob_exp():
    """Exponential null, rate 1, tilt 1 (alternative rate 2)."""
    return make_problem(erlang(1, 1.0), 1.0)


@pytest.fixture(scope="session")
def prob_erlang2():
    """Erlang-2 null, rate 1, tilt 1 (rate ratio 1/2, jump 2 log 2)."""
    return make_problem(erlang(2, 1.0), 1.0)


@pytest.fixture(scope="session")
def hyper_ph():
    """Hyperexponential mix of rates (1, 3) with equal weights."""
    return validate([0.5, 0.5], [[-1.0, 0.0], [0.0, -3.0]])


def rho_problem(rho: float, phases: int = 2):
    """Unit-slope Erlang problem parametrized by the rate ratio."""
    return make_problem(erlang(phases, rho / (1.0 - rho)), 1.0)


def renewal_w(ph, theta: float, d: float, z: float, x: float) -> np.ndarray:
    """Independent scale-matrix oracle via block matrix exponentials.

    Expands the transform inverse as a geometric series in the jump factor;
    the k-th term is a (k+1)-fold convolution of matrix exponentials,
    evaluated exactly as a corner block of a block-bidiagonal exponential.
    Completely independent of both the closed-form series arithmetic and
    the contour inversion.
    """
    n = ph.n
    U = -ph.T / theta
    R = np.outer(ph.t, ph.nu) / theta
    K = int(np.floor(x / d))
    W = np.zeros((n, n))
    for k in range(K + 1):
        y = x - d * k
        dim = (k + 1) * n
        G = np.zeros((dim, dim))
        for blk in range(k + 1):
            G[blk * n : (blk + 1) * n, blk * n : (blk + 1) * n] = U
            if blk < k:
                G[blk * n : (blk + 1) * n, (blk + 1) * n : (blk + 2) * n] = R
        W += (-z) ** k * expm(G * y)[0:n, k * n : (k + 1) * n] / theta
    return W


def gauss_segments(fun, X: float, d: float, order: int = 40) -> np.ndarray:
    """Matrix quadrature over [0, X] split at multiples of d (test oracle)."""
    edges = list(np.arange(0.0, X, d)) + [X]
    nodes, weights = np.polynomial.legendre.leggauss(order)
    total = None
    for e0, e1 in zip(edges[:-1], edges[1:]):
        mid, half = 0.5 * (e0 + e1), 0.5 * (e1 - e0)
        for u, w in zip(nodes, weights):
            piece = (w * half) * np.asarray(fun(mid + half * u))
            total = piece if total is None else total + piece
    return total
