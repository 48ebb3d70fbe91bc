"""Location estimation for the Cauchy model from the weak first moment.

With ``phi_s(x) = exp(-x^2 / (2 s^2))`` and ``f(.; mu)`` the Cauchy(mu, 1)
density, ``m1(mu) = int x phi_s(x) f(x; mu) dx`` is smooth, odd and strictly
increasing near 0.  The estimator solves ``m1(mu) = mean(X phi_s(X))``.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .distributions import Cauchy
from .errors import EmptySample, NoBracket, OutOfRange, ParameterOutOfDomain
from .kernels import KernelSpec
from .quadrature import DEFAULT_CONFIG, QuadratureConfig
from .weakcore import WeakPair, weak_moment

DERIVATIVE_FLOOR = 1e-6
_SCAN_STEP = 0.01
_SCAN_LIMIT = 20.0
_FD_STEP = 1e-3


def bandwidth_kernel(sigma: float) -> KernelSpec:
    if not sigma > 0:
        raise ParameterOutOfDomain("bandwidth sigma must be > 0")
    return KernelSpec.gaussian(a=1.0 / (2.0 * sigma * sigma))


def theoretical_weak_m1(mu: float, sigma: float, quad: QuadratureConfig = DEFAULT_CONFIG) -> float:
    return weak_moment(WeakPair(Cauchy(mu, 1.0), bandwidth_kernel(sigma), quad), 1)


def empirical_weak_m1(samples, sigma: float) -> float:
    """``n^-1 sum X_i phi_s(X_i)``; bounded by ``sigma e^{-1/2}`` in absolute value."""
    x = np.asarray(samples, dtype=float).ravel()
    if x.size == 0:
        raise EmptySample("empirical weak moment of an empty sample")
    if not sigma > 0:
        raise ParameterOutOfDomain("bandwidth sigma must be > 0")
    bound = sigma * math.exp(-0.5)
    # clipping only absorbs last-bit rounding; the exact terms never exceed the bound
    with np.errstate(over="ignore"):  # x^2 overflows only where the weight is 0 anyway
        terms = np.clip(x * np.exp(-x * x / (2.0 * sigma * sigma)), -bound, bound)
    return float(np.clip(math.fsum(terms) / x.size, -bound, bound))


@dataclass(frozen=True)
class LocationModel:
    sigma: float = 1.0
    quad: QuadratureConfig = DEFAULT_CONFIG
    monotone_interval: tuple = field(init=False)
    m1_range: tuple = field(init=False)

    def __post_init__(self):
        lo, hi = _monotone_interval(self.sigma, self.quad)
        object.__setattr__(self, "monotone_interval", (lo, hi))
        object.__setattr__(self, "m1_range", (self.m1(lo), self.m1(hi)))

    def m1(self, mu: float) -> float:
        return theoretical_weak_m1(mu, self.sigma, self.quad)

    def derivative(self, mu: float, h: float = _FD_STEP) -> float:
        return (self.m1(mu + h) - self.m1(mu - h)) / (2.0 * h)


def _monotone_interval(sigma: float, quad: QuadratureConfig) -> tuple[float, float]:
    """Largest symmetric interval around 0 where ``m1'`` exceeds the floor.

    ``m1`` is odd in ``mu``, so ``m1'`` is even and one side suffices.
    """
    def deriv(mu):
        return (theoretical_weak_m1(mu + _FD_STEP, sigma, quad)
                - theoretical_weak_m1(mu - _FD_STEP, sigma, quad)) / (2.0 * _FD_STEP)

    if not deriv(0.0) > DERIVATIVE_FLOOR:
        raise ParameterOutOfDomain(f"m1 is not increasing at 0 for sigma={sigma}")
    last = 0.0
    for mu in np.arange(_SCAN_STEP, _SCAN_LIMIT + _SCAN_STEP / 2, _SCAN_STEP):
        if not deriv(mu) > DERIVATIVE_FLOOR:
            break
        last = float(mu)
    return -last, last


def estimate_location(samples, sigma: float, model: LocationModel | None = None,
                      xtol: float = 1e-10) -> float:
    model = model or LocationModel(sigma)
    if model.sigma != sigma:
        raise ParameterOutOfDomain("model bandwidth differs from sigma")
    return invert_m1(empirical_weak_m1(samples, sigma), model, xtol)


def invert_m1(m_hat: float, model: LocationModel, xtol: float = 1e-10) -> float:
    """Root of ``m1(mu) = m_hat`` on the monotone interval."""
    lo, hi = model.monotone_interval
    f_lo, f_hi = model.m1_range
    if not f_lo <= m_hat <= f_hi:
        raise OutOfRange(f"m1 estimate {m_hat:.6g} outside attainable range [{f_lo:.6g}, {f_hi:.6g}]")
    if m_hat == f_lo:
        return lo
    if m_hat == f_hi:
        return hi
    try:
        return float(brentq(lambda mu: model.m1(mu) - m_hat, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps))
    except ValueError as exc:
        raise NoBracket(str(exc)) from exc


@dataclass(frozen=True)
class McStudy:
    mu_true: float
    sigma: float
    n_list: tuple
    reps: int
    seed: int
    bias: np.ndarray
    sd: np.ndarray
    sd_sqrt_n: np.ndarray
    failures: np.ndarray
    estimates: dict  # n -> successful estimates in replication order


def rep_rng(seed: int, n: int, rep: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(n, rep)))


def monte_carlo_study(mu_true: float, sigma: float, n_list, reps: int, seed: int,
                      workers: int = 1, model: LocationModel | None = None) -> McStudy:
    """Bias and spread of the estimator over seeded replications.

    Replication ``r`` at sample size ``n`` draws from the stream ``(seed, n, r)``.
    Failed inversions are counted, not clipped.
    """
    if reps < 200:
        raise ParameterOutOfDomain("reps must be at least 200")
    model = model or LocationModel(sigma)
    lo, hi = model.monotone_interval
    if not lo < mu_true < hi:
        raise ParameterOutOfDomain(f"mu_true={mu_true} outside the monotone interval ({lo}, {hi})")

    def one(job):
        n, r = job
        x = mu_true + rep_rng(seed, n, r).standard_cauchy(n)
        try:
            return estimate_location(x, sigma, model)
        except (OutOfRange, NoBracket):
            return math.nan

    bias, sd, fails, est = [], [], [], {}
    for n in n_list:
        jobs = [(n, r) for r in range(reps)]
        if workers > 1:
            with ThreadPoolExecutor(workers) as pool:
                vals = np.array(list(pool.map(one, jobs)))
        else:
            vals = np.array([one(j) for j in jobs])
        ok = vals[np.isfinite(vals)]
        est[n] = ok
        fails.append(len(vals) - len(ok))
        bias.append(float(ok.mean() - mu_true) if ok.size else math.nan)
        sd.append(float(ok.std(ddof=1)) if ok.size > 1 else math.nan)
    sd = np.array(sd)
    return McStudy(mu_true, sigma, tuple(n_list), reps, seed, np.array(bias), sd,
                   sd * np.sqrt(np.array(n_list, dtype=float)), np.array(fails), est)
