"""Recovering probabilistic content from weak data.

Two routes: the kernel-weighted CDF via smoothed indicators, and Tikhonov
reconstruction of ``f`` from ``g = phi f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtr

from .distributions import has_density
from .errors import KernelNotPositive, NonPositiveLambda, NotADensity, ParameterOutOfDomain
from .kernels import KernelSpec
from .quadrature import integrate
from .weakcore import WeakPair, weak_expectation

DEFAULT_EPS_SCHEDULE = (0.5, 0.25, 0.125, 0.0625)
DEFAULT_LAMBDAS = (1e-1, 1e-2, 1e-3, 1e-4)
GRID_HALF_WIDTH = 20.0
GRID_STEP = 1e-3


@dataclass(frozen=True)
class MollifiedIndicator:
    """``psi(x) = Phi((a - x) / eps)``, a smooth stand-in for ``1{x < a}``."""
    a: float
    eps: float

    def __post_init__(self):
        if not self.eps > 0:
            raise ParameterOutOfDomain("smoothing width must be > 0")

    def __call__(self, x):
        return ndtr((self.a - np.asarray(x, dtype=float)) / self.eps)


@dataclass(frozen=True)
class WeightedCdf:
    a: float
    eps: np.ndarray
    values: np.ndarray       # E[psi_eps] per eps
    limit: float             # Richardson extrapolation from the last two values
    reference: float | None  # direct integral of f phi over (-inf, a]

    @property
    def errors(self) -> np.ndarray:
        if self.reference is None:
            raise ValueError("no reference value available")
        return np.abs(self.values - self.reference)


def weighted_cdf_reference(p: WeakPair, a: float) -> float:
    """``F_phi(a) = int_{-inf}^a f phi`` for a density pair."""
    d = p.dist
    if not has_density(d):
        raise NotADensity("the direct weighted CDF needs a density component")
    k = p.kernel
    return integrate(lambda x: k(x) * d.pdf(x), (-math.inf, a), p.quad,
                     witness=lambda x: np.exp(k.log_eval(x)), center=k.shift,
                     points=list(d.landmarks()) + [k.shift]).value


def weighted_cdf(p: WeakPair, a: float, eps_schedule=DEFAULT_EPS_SCHEDULE,
                 reference: bool = True) -> WeightedCdf:
    """``E[psi_eps]`` along a decreasing schedule and its extrapolated limit.

    The smoother is symmetric about ``a``, so the bias is ``O(eps^2)`` where
    ``f phi`` is smooth; the limit uses that order.
    """
    eps = np.asarray(eps_schedule, dtype=float)
    if eps.size == 0 or np.any(eps <= 0) or np.any(np.diff(eps) >= 0):
        raise ParameterOutOfDomain("eps schedule must be positive and strictly decreasing")
    values = np.array([
        weak_expectation(p, MollifiedIndicator(a, e), points=[a - 3 * e, a - e, a, a + e, a + 3 * e])
        for e in eps
    ])
    if len(eps) >= 2:
        r2 = (eps[-2] / eps[-1]) ** 2
        limit = values[-1] + (values[-1] - values[-2]) / (r2 - 1.0)
    else:
        limit = values[-1]
    ref = weighted_cdf_reference(p, a) if reference else None
    return WeightedCdf(a, eps, values, float(limit), ref)


# --- Tikhonov ----------------------------------------------------------------

def default_grid() -> np.ndarray:
    n = int(round(2 * GRID_HALF_WIDTH / GRID_STEP))
    return np.linspace(-GRID_HALF_WIDTH, GRID_HALF_WIDTH, n + 1)


def grid_norm(values, x) -> float:
    """Discrete L2 norm by the trapezoid rule."""
    v = np.asarray(values)
    return math.sqrt(np.trapezoid(np.abs(v) ** 2, x))


def _check(k: KernelSpec, lam: float):
    if not k.strictly_positive:
        raise KernelNotPositive(f"{k.family} kernel vanishes somewhere")
    if not lam > 0:
        raise NonPositiveLambda(f"lambda must be > 0, got {lam!r}")


def tikhonov_multiplier(k: KernelSpec, lam: float, x) -> np.ndarray:
    """``phi / (phi^2 + lambda)``, bounded by ``1 / (2 sqrt(lambda))``."""
    _check(k, lam)
    phi = k(np.asarray(x, dtype=float))
    return phi / (phi * phi + lam)


def tikhonov_apply(k: KernelSpec, g: Callable, lam: float) -> Callable:
    """``R_lambda g``, the minimiser of ``||phi u - g||^2 + lambda ||u||^2``."""
    _check(k, lam)

    def R(x):
        x = np.asarray(x, dtype=float)
        return tikhonov_multiplier(k, lam, x) * np.asarray(g(x))
    return R


def normal_equation_residual(k: KernelSpec, g: Callable, lam: float, x=None) -> float:
    """Max over the grid of ``|phi (phi u - g) + lambda u|`` at ``u = R_lambda g``."""
    x = default_grid() if x is None else np.asarray(x, dtype=float)
    u = tikhonov_apply(k, g, lam)(x)
    phi = k(x)
    return float(np.max(np.abs(phi * (phi * u - g(x)) + lam * u)))


def scaled_noise(x, delta: float, seed: int) -> np.ndarray:
    """i.i.d. Gaussian grid noise rescaled to discrete L2 norm exactly ``delta``."""
    if delta == 0:
        return np.zeros(len(x))
    e = np.random.default_rng(seed).standard_normal(len(x))
    return e * (delta / grid_norm(e, x))


@dataclass(frozen=True)
class TikhonovResult:
    lam: float
    delta: float
    x: np.ndarray
    g_noisy: np.ndarray
    reconstruction: np.ndarray
    l2_error: float | None
    bias_term: float | None
    bound_value: float | None

    @property
    def bound_holds(self) -> bool:
        return self.l2_error is not None and self.l2_error <= self.bound_value


def tikhonov_noisy(k: KernelSpec, g: Callable, noise, lam: float,
                   truth: Callable | None = None, x=None) -> TikhonovResult:
    """Reconstruction from ``g + noise`` on a grid with its error and the a priori bound.

    ``noise`` is an array on the grid or a callable; ``delta`` is its discrete
    L2 norm.  The bound is ``delta / (2 sqrt(lambda)) + ||lambda f / (phi^2 + lambda)||``.
    """
    _check(k, lam)
    x = default_grid() if x is None else np.asarray(x, dtype=float)
    e = np.asarray(noise(x) if callable(noise) else noise, dtype=float)
    if e.shape != x.shape:
        raise ParameterOutOfDomain("noise must match the evaluation grid")
    delta = grid_norm(e, x)
    gd = np.asarray(g(x)) + e
    rec = tikhonov_multiplier(k, lam, x) * gd
    err = bias = bound = None
    if truth is not None:
        f = np.asarray(truth(x))
        phi = k(x)
        err = grid_norm(rec - f, x)
        bias = grid_norm(lam * f / (phi * phi + lam), x)
        bound = delta / (2.0 * math.sqrt(lam)) + bias
    return TikhonovResult(lam, delta, x, gd, rec, err, bias, bound)
