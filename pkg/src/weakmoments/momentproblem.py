"""Recovery of distributions from Gaussian-kernel weak moments.

Hermite functions ``h_n(x) = H_n(x) exp(-x^2/2)`` span the same spaces as
``x^k exp(-x^2/2)``, so the weak moments under the standard Gaussian kernel
determine every coefficient ``<T, h_n>`` through an exact triangular matrix.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.signal import convolve2d

from .distributions import Atom, Density
from .errors import KernelNotGaussian, KernelNotPositive, NotSPD, OrderTooLarge
from .kernels import KernelSpec
from .quadrature import gauss_legendre_panels, integrate
from .weakcore import MomentSequence, WeakPair, weak_moments

MAX_HERMITE_ORDER = 60
MAX_BASIS_ORDER = 40
MAX_CARLEMAN_ORDER = 30


def hermite_norm_sq(n: int) -> float:
    """``||h_n||^2 = 2^n n! sqrt(pi)``."""
    return math.ldexp(math.factorial(n) * math.sqrt(math.pi), n)


@dataclass(frozen=True)
class HermiteBasis:
    N_max: int
    coeff_table: tuple  # coeff_table[n][k]: coefficient of x^k in H_n, exact ints
    norms: tuple        # ||h_n||^2

    @classmethod
    def build(cls, N_max: int) -> "HermiteBasis":
        M, _ = monomial_hermite_matrix(N_max)
        return cls(N_max, M, tuple(hermite_norm_sq(n) for n in range(N_max + 1)))


def hermite_function(n: int, x):
    """``h_n(x)`` from the orthonormal three-term recurrence, rescaled at the end."""
    if int(n) != n or n < 0:
        raise OrderTooLarge("Hermite order must be a nonnegative integer")
    if n > MAX_HERMITE_ORDER:
        raise OrderTooLarge(f"Hermite order {n} exceeds {MAX_HERMITE_ORDER}")
    x = np.asarray(x, dtype=float)
    prev = np.zeros_like(x)
    cur = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    for k in range(int(n)):
        prev, cur = cur, math.sqrt(2.0 / (k + 1)) * x * cur - math.sqrt(k / (k + 1)) * prev
    out = cur * math.sqrt(hermite_norm_sq(int(n)))
    return float(out) if out.ndim == 0 else out


@lru_cache(maxsize=None)
def monomial_hermite_matrix(N: int) -> tuple[tuple, tuple]:
    """Exact lower-triangular ``M`` with ``H_n = sum_k M[n][k] x^k`` and its inverse.

    ``M`` has integer entries; the inverse has ``Fraction`` entries and satisfies
    ``x^n = sum_k Minv[n][k] H_k``.
    """
    if N > MAX_BASIS_ORDER:
        raise OrderTooLarge(f"basis order {N} exceeds {MAX_BASIS_ORDER}")
    rows = [[1]]
    if N >= 1:
        rows.append([0, 2])
    for n in range(1, N):
        nxt = [0] * (n + 2)
        for k, c in enumerate(rows[n]):
            nxt[k + 1] += 2 * c
        for k, c in enumerate(rows[n - 1]):
            nxt[k] -= 2 * n * c
        rows.append(nxt)
    M = tuple(tuple(r + [0] * (N + 1 - len(r))) for r in rows)
    inv = []
    for n in range(N + 1):
        row = [Fraction(0)] * (N + 1)
        for k in range(n % 2, n + 1, 2):
            row[k] = Fraction(math.factorial(n), 2 ** n * math.factorial(k) * math.factorial((n - k) // 2))
        inv.append(tuple(row))
    return M, tuple(inv)


def _float_matrix(rows) -> np.ndarray:
    return np.array([[float(v) for v in r] for r in rows])


@dataclass(frozen=True)
class RecoveryResult:
    hermite_coeffs: np.ndarray
    reconstructed_density: Callable | None
    l2_error: float | None
    condition_estimate: float
    residual: float


def _standardise(moments: MomentSequence) -> tuple[np.ndarray, float]:
    """Moments rescaled to the kernel ``exp(-y^2/2)`` for the law of ``r X``."""
    k = moments.kernel
    if k.family != "gaussian":
        raise KernelNotGaussian(f"recovery needs a Gaussian kernel, got {k.family}")
    if k.shift != 0:
        raise KernelNotGaussian("recovery needs a Gaussian kernel centred at 0")
    r = math.sqrt(2.0 * k.a) * abs(k.scale)
    m = np.asarray(moments.values, dtype=float)
    return m * r ** np.arange(len(m)) / k.c, r


def grid_l2(f: Callable, g: Callable, lo: float = -10.0, hi: float = 10.0, step: float = 1e-3) -> float:
    x = np.arange(lo, hi + step / 2, step)
    d = np.asarray(f(x)) - np.asarray(g(x))
    return math.sqrt(np.trapezoid(d * d, x))


def recover_from_weak_moments(moments: MomentSequence, N: int,
                              truth: Callable | None = None) -> RecoveryResult:
    """Hermite coefficients ``<T, h_k>`` for ``k <= N`` and the truncated expansion.

    ``truth`` is an optional reference density for the grid L2 error.
    """
    if N > MAX_BASIS_ORDER:
        raise OrderTooLarge(f"recovery order {N} exceeds {MAX_BASIS_ORDER}")
    if moments.order < N:
        raise OrderTooLarge(f"need moments up to order {N}, have {moments.order}")
    mu, r = _standardise(moments)
    mu = mu[: N + 1]
    M, Minv = monomial_hermite_matrix(N)
    Mf = _float_matrix(M)
    coeffs = Mf @ mu
    back = _float_matrix(Minv) @ coeffs
    residual = float(np.max(np.abs(back - mu)) / max(np.max(np.abs(mu)), 1e-300))
    scaled = coeffs / np.array([hermite_norm_sq(k) for k in range(N + 1)])

    def density(x):
        y = r * np.asarray(x, dtype=float)
        return r * sum(c * hermite_function(k, y) for k, c in enumerate(scaled))

    err = grid_l2(density, truth) if truth is not None else None
    return RecoveryResult(coeffs, density, err, float(np.linalg.cond(Mf)), residual)


# --- two dimensions ----------------------------------------------------------

def spd_sqrt(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.shape != (2, 2) or not np.allclose(A, A.T, rtol=0, atol=1e-14 * np.abs(A).max()):
        raise NotSPD("kernel matrix must be a symmetric 2x2 matrix")
    w, V = np.linalg.eigh(A)
    if np.any(w <= 0):
        raise NotSPD(f"kernel matrix has non-positive eigenvalue {w.min():.3g}")
    return (V * np.sqrt(w)) @ V.T


def _linear_form_powers(l1: float, l2: float, N: int) -> list[np.ndarray]:
    """Coefficient arrays of ``H_a(l1 x + l2 y)`` in ``x^i y^j``, a <= N."""
    M, _ = monomial_hermite_matrix(N)
    powers = [np.zeros((N + 1, N + 1)) for _ in range(N + 1)]
    for k in range(N + 1):
        for j in range(k + 1):
            powers[k][j, k - j] = math.comb(k, j) * l1 ** j * l2 ** (k - j)
    return [sum(float(M[a][k]) * powers[k] for k in range(a + 1)) for a in range(N + 1)]


def hermite_product_polynomial(L: np.ndarray, N: int) -> dict:
    """``P[alpha]`` with ``h_alpha(L z) = sum P[alpha][i, j] x^i y^j exp(-|Lz|^2 / 2)``."""
    q0 = _linear_form_powers(L[0, 0], L[0, 1], N)
    q1 = _linear_form_powers(L[1, 0], L[1, 1], N)
    out = {}
    for a1 in range(N + 1):
        for a2 in range(N + 1 - a1):
            out[(a1, a2)] = convolve2d(q0[a1], q1[a2])[: N + 1, : N + 1]
    return out


@dataclass(frozen=True)
class Recovery2D:
    hermite_coeffs: dict
    L: np.ndarray
    reconstructed_density: Callable
    l2_error: float | None


def weak_moments_2d(fx: Density, fy: Density, N: int, A=None, *, panel: float = 0.25,
                    order: int = 20) -> np.ndarray:
    """``m[i, j] = <fx (x) fy, x^i y^j exp(-z^T A z / 2)>`` for ``i + j <= N``.

    Tensor composite Gauss-Legendre; entries with ``i + j > N`` are NaN.
    """
    A = np.eye(2) if A is None else np.asarray(A, dtype=float)
    spd_sqrt(A)
    lam = np.linalg.eigvalsh(A).min()
    radius = 8.0
    while -0.5 * lam * radius ** 2 + N * math.log1p(radius * math.sqrt(2)) > math.log(1e-18):
        radius += 0.5
    breaks = np.arange(-radius, radius + panel / 2, panel)
    z, w = gauss_legendre_panels(breaks, order)
    X, Y = np.meshgrid(z, z, indexing="ij")
    W = (w * fx.pdf(z))[:, None] * (w * fy.pdf(z))[None, :]
    W = W * np.exp(-0.5 * (A[0, 0] * X * X + 2 * A[0, 1] * X * Y + A[1, 1] * Y * Y))
    P = np.vander(z, N + 1, increasing=True).T
    m = P @ W @ P.T
    i, j = np.indices(m.shape)
    m[i + j > N] = np.nan
    return m


def recover_2d(moment_array, N: int, A=None, truth: Callable | None = None,
               extent: float = 8.0, step: float = 0.02) -> Recovery2D:
    """Coefficients ``<T, h_alpha o L>`` with ``L = A^{1/2}`` and the truncated expansion.

    ``truth(x, y)`` is an optional reference density; the L2 error uses a 2-D
    trapezoid rule on ``[-extent, extent]^2``.
    """
    if N > MAX_BASIS_ORDER:
        raise OrderTooLarge(f"recovery order {N} exceeds {MAX_BASIS_ORDER}")
    A = np.eye(2) if A is None else np.asarray(A, dtype=float)
    L = spd_sqrt(A)
    m = np.nan_to_num(np.asarray(moment_array, dtype=float)[: N + 1, : N + 1])
    P = hermite_product_polynomial(L, N)
    coeffs = {alpha: float(np.sum(poly * m)) for alpha, poly in P.items()}
    det = float(np.linalg.det(L))

    def density(x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        w1 = L[0, 0] * x + L[0, 1] * y
        w2 = L[1, 0] * x + L[1, 1] * y
        h1 = [hermite_function(k, w1) for k in range(N + 1)]
        h2 = [hermite_function(k, w2) for k in range(N + 1)]
        out = np.zeros(np.broadcast(x, y).shape)
        for (a1, a2), c in coeffs.items():
            out = out + c / (hermite_norm_sq(a1) * hermite_norm_sq(a2)) * h1[a1] * h2[a2]
        return det * out

    err = None
    if truth is not None:
        g = np.arange(-extent, extent + step / 2, step)
        X, Y = np.meshgrid(g, g, indexing="ij")
        d = density(X, Y) - truth(X, Y)
        err = math.sqrt(np.trapezoid(np.trapezoid(d * d, g, axis=1), g))
    return Recovery2D(coeffs, L, density, err)


# --- Carleman diagnostic and the kernel-zero obstruction --------------------

@dataclass(frozen=True)
class CarlemanResult:
    mu: np.ndarray           # mu_{2n}, n = 1..N
    terms: np.ndarray        # mu_{2n}^{-1/(2n)}
    partial_sums: np.ndarray
    fitted_exponent: float   # log-log slope of terms over n in [5, N]


def carleman_partial_sums(k: KernelSpec, N: int) -> CarlemanResult:
    if not k.strictly_positive:
        raise KernelNotPositive(f"{k.family} kernel vanishes somewhere")
    if N > MAX_CARLEMAN_ORDER or N < 1:
        raise OrderTooLarge(f"N must lie in 1..{MAX_CARLEMAN_ORDER}")
    mu = []
    for n in range(1, N + 1):
        def witness(x, n=n):
            return np.exp(2 * n * np.log1p(np.abs(x)) + k.log_eval(x))
        mu.append(integrate(lambda x, n=n: x ** (2 * n) * k(x), witness=witness,
                            center=k.shift, points=[k.shift]).value)
    mu = np.array(mu)
    ns = np.arange(1, N + 1)
    terms = mu ** (-1.0 / (2 * ns))
    sel = ns >= 5
    slope = float(np.polyfit(np.log(ns[sel]), np.log(terms[sel]), 1)[0]) if sel.sum() >= 2 else math.nan
    return CarlemanResult(mu, terms, np.cumsum(terms), slope)


def kernel_zero_obstruction(x0: float, n_max: int = 10) -> MomentSequence:
    """Weak moments of the atom at ``x0`` under a kernel with a double zero there."""
    k = KernelSpec.zero_at_origin(shift=x0)
    return weak_moments(WeakPair(Atom(x0, 1.0), k), n_max)


def moment_separation(d1, d2, N: int = 12, kernel: KernelSpec | None = None) -> float:
    """Sup-norm distance between two weak moment sequences of order ``N``."""
    k = kernel or KernelSpec()
    a = weak_moments(WeakPair(d1, k), N).values
    b = weak_moments(WeakPair(d2, k), N).values
    return float(np.max(np.abs(a - b)))
