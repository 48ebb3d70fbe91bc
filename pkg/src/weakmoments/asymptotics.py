"""Weak central limit theorem in transform space and by sampling.

The weak CF of the standardised sum ``Z_n = (S_n - n k1) / sqrt(n k2)`` is
computed exactly from the base CGF, with no n-fold convolution:

    log cf_Zn(t) = -i t n k1 / sqrt(n k2) + n K(t / sqrt(n k2)).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import stats

from .distributions import Mixture, has_density
from .errors import EnvelopeSearchFailed, NonPositiveVariance, NotADensity, ParameterOutOfDomain
from .quadrature import integrate, integrate_complex
from .weakcore import (
    WeakPair,
    central_stencil,
    symmetric_grid,
    unwrap_log,
    weak_cf_values,
    weak_cumulants,
    weak_moment,
)

DEFAULT_T_MAX = 3.0
DEFAULT_GRID_POINTS = 121
FD_STEP = 1e-3


def _base_cumulants(p: WeakPair) -> tuple[float, float, float]:
    cs = weak_cumulants(p, 2)
    k1, k2 = cs.kappa(1), cs.kappa(2)
    if not k2 > 0:
        raise NonPositiveVariance(f"second weak cumulant is {k2!r}; the CLT scaling is undefined")
    return k1, k2, cs.base_normalisation


def normalized_sum_cf(p: WeakPair, n: int, t: float, cumulants=None) -> complex:
    """Weak CF of the standardised ``n``-fold independent sum at ``t``."""
    k1, k2, _ = cumulants or _base_cumulants(p)
    scale = math.sqrt(n * k2)
    u = t / scale
    # K(u) - K(0) along one path, so that t = 0 gives exactly 1
    path = np.linspace(0.0, u, max(2, math.ceil(abs(u) / 0.05) + 1))
    log_cf, _ = unwrap_log(weak_cf_values(p, path), 0)
    K = log_cf[-1] - log_cf[0]
    return complex(np.exp(-1j * t * n * k1 / scale + n * K))


def normalized_sum_log_cf(p: WeakPair, n: int, t_grid, cumulants=None) -> np.ndarray:
    """Branch-continuous ``log cf_Zn`` on a symmetric grid containing 0."""
    k1, k2, _ = cumulants or _base_cumulants(p)
    t = np.asarray(t_grid, dtype=float)
    scale = math.sqrt(n * k2)
    cf = weak_cf_values(p, t / scale)
    c = len(t) // 2
    K, _ = unwrap_log(cf, c)
    return -1j * t * n * k1 / scale + n * (K - K[c])


def clt_sup_error(p: WeakPair, n: int, T_max: float = DEFAULT_T_MAX,
                  n_points: int = DEFAULT_GRID_POINTS, cumulants=None) -> float:
    t = symmetric_grid(T_max, n_points)
    logz = normalized_sum_log_cf(p, n, t, cumulants)
    return float(np.max(np.abs(np.exp(logz) - np.exp(-0.5 * t * t))))


@dataclass(frozen=True)
class BerryEsseen:
    M_T: float
    kappa2: float
    T_max: float

    def bound(self, n) -> float | np.ndarray:
        return self.M_T * self.T_max ** 3 / (6.0 * self.kappa2 ** 1.5 * np.sqrt(n))


def cgf_third_derivative(p: WeakPair, u, h: float = FD_STEP) -> np.ndarray:
    """``K'''(u)`` from a 4th-order central stencil on the locally unwrapped log CF."""
    offsets, weights = central_stencil(3, 4)
    u = np.atleast_1d(np.asarray(u, dtype=float))
    out = np.empty(len(u), dtype=complex)
    for i, ui in enumerate(u):
        cf = weak_cf_values(p, ui + h * np.array(offsets, dtype=float))
        # log of ratios to the centre value is branch-safe for small h
        local = np.log(cf / cf[len(offsets) // 2])
        out[i] = sum(float(w) * v for w, v in zip(weights, local)) / h ** 3
    return out


def berry_esseen_bound(p: WeakPair, T_max: float = DEFAULT_T_MAX, n_u: int = 201,
                       cumulants=None) -> BerryEsseen:
    """``M_T = sup |K'''(u)|`` over ``|u| <= T_max / sqrt(k2)`` and the explicit bound."""
    _, k2, _ = cumulants or _base_cumulants(p)
    u = symmetric_grid(T_max / math.sqrt(k2), n_u)
    k3 = np.abs(cgf_third_derivative(p, u))
    return BerryEsseen(float(k3.max()), k2, T_max)


@dataclass(frozen=True)
class CltRun:
    base_pair: WeakPair
    kappa1: float
    kappa2: float
    n_list: tuple
    t_grid: np.ndarray
    sup_errors: np.ndarray
    log_errors: np.ndarray   # sup_t |log cf_Zn(t) + t^2/2| per n
    fitted_slope: float


def clt_run(p: WeakPair, n_list, T_max: float = DEFAULT_T_MAX,
            n_points: int = DEFAULT_GRID_POINTS, workers: int = 1) -> CltRun:
    cum = _base_cumulants(p)
    t = symmetric_grid(T_max, n_points)
    gauss = -0.5 * t * t

    def one(n):
        logz = normalized_sum_log_cf(p, n, t, cum)
        return (float(np.max(np.abs(np.exp(logz) - np.exp(gauss)))),
                float(np.max(np.abs(logz - gauss))))

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            res = list(pool.map(one, n_list))
    else:
        res = [one(n) for n in n_list]
    sup = np.array([r[0] for r in res])
    logerr = np.array([r[1] for r in res])
    slope = float(np.polyfit(np.log(n_list), np.log(sup), 1)[0]) if len(n_list) > 1 else math.nan
    return CltRun(p, cum[0], cum[1], tuple(n_list), t, sup, logerr, slope)


# --- kernel-weighted density and sampling -----------------------------------

@dataclass(frozen=True)
class WeightedDensity:
    pair: WeakPair
    Z: float
    mean: float
    var: float
    proposal_scale: float
    envelope: float  # sup h / q over the proposal support, with a safety factor

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return self.pair.kernel(x) * self.pair.dist.pdf(x) / self.Z

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def proposal_pdf(self, x):
        return _t3_pdf((np.asarray(x, dtype=float) - self.mean) / self.proposal_scale) / self.proposal_scale

    def cf(self, t: float) -> complex:
        """Classical CF of ``h`` by direct quadrature of ``e^{itx} h(x)``."""
        k = self.pair.kernel
        return integrate_complex(lambda x: np.exp(1j * t * x) * self.pdf(x), cfg=self.pair.quad,
                                 witness=lambda x: np.exp(k.log_eval(x)) / self.Z,
                                 center=k.shift, points=list(self.pair.dist.landmarks()),
                                 frequency=t).value


_ENVELOPE_SAFETY = 1.02
_T3_CONST = 2.0 / (math.pi * math.sqrt(3.0))


def _t3_pdf(z):
    q = 1.0 + z * z / 3.0
    return _T3_CONST / (q * q)


def weighted_density(p: WeakPair) -> WeightedDensity:
    """``h = phi f / Z`` with its mean, variance and a t(3) rejection envelope."""
    d = p.dist
    if not has_density(d) or (isinstance(d, Mixture) and not d.is_probabilistic):
        raise NotADensity("the weighted density needs a nonnegative density component")
    if not p.kernel.c > 0:
        raise ParameterOutOfDomain("kernel must be nonnegative")
    Z = weak_moment(p, 0)
    if not Z > 0:
        raise NotADensity(f"normalising constant {Z!r} is not positive")
    k = p.kernel
    marks = list(d.landmarks())

    def moment(n):
        return integrate(lambda x: x ** n * k(x) * d.pdf(x) / Z, cfg=p.quad,
                         witness=lambda x: np.exp(n * np.log1p(np.abs(x)) + k.log_eval(x)),
                         center=k.shift, points=marks).value

    mean = moment(1)
    var = moment(2) - mean * mean
    if not var > 0:
        raise NonPositiveVariance(f"weighted variance {var!r} is not positive")
    s = 3.0 * math.sqrt(var)
    x = mean + s * np.linspace(-40.0, 40.0, 80001)
    ratio = (k(x) * d.pdf(x) / Z) / (_t3_pdf((x - mean) / s) / s)
    idx = int(np.argmax(ratio))
    if not np.all(np.isfinite(ratio)) or idx in (0, len(x) - 1):
        raise EnvelopeSearchFailed("h / proposal does not attain an interior maximum")
    return WeightedDensity(p, Z, mean, var, s, float(ratio[idx]) * _ENVELOPE_SAFETY)


def chunk_rng(seed: int, *key: int) -> np.random.Generator:
    """Independent stream for a work chunk, keyed by ``(seed, *key)``."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=tuple(key)))


def _rejection(h: WeightedDensity, n: int, rng: np.random.Generator) -> tuple[np.ndarray, int]:
    out = []
    have = 0
    proposed = 0
    rate = 1.0 / h.envelope
    while have < n:
        m = int((n - have) / rate * 1.1) + 16
        y = h.mean + h.proposal_scale * rng.standard_t(3, m)
        u = rng.random(m)
        keep = y[u * h.envelope * h.proposal_pdf(y) < h.pdf(y)]
        proposed += m
        out.append(keep)
        have += len(keep)
    return np.concatenate(out)[:n], proposed


@dataclass(frozen=True)
class WeightedSample:
    values: np.ndarray
    acceptance_rate: float


SAMPLE_CHUNK = 1 << 16


def sample_weighted(h: WeightedDensity, n: int, seed: int, workers: int = 1) -> WeightedSample:
    """``n`` draws from ``h`` by rejection; chunk ``i`` uses the stream ``(seed, i)``."""
    sizes = [min(SAMPLE_CHUNK, n - s) for s in range(0, n, SAMPLE_CHUNK)]
    jobs = [(i, m) for i, m in enumerate(sizes)]

    def run(job):
        i, m = job
        return _rejection(h, m, chunk_rng(seed, i))

    res = _map(run, jobs, workers)
    values = np.concatenate([r[0] for r in res]) if res else np.empty(0)
    proposed = sum(r[1] for r in res)
    return WeightedSample(values, n / proposed if proposed else math.nan)


def _map(fn: Callable, items, workers: int) -> list:
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def standardised_sums(h: WeightedDensity, n: int, reps: int, seed: int,
                      workers: int = 1, kappa=None) -> np.ndarray:
    """``reps`` values of ``(sum Y_i - n k1) / sqrt(n k2)`` with ``Y_i ~ h``.

    ``kappa`` defaults to the quadrature mean and variance of ``h``.
    """
    k1, k2 = kappa or (h.mean, h.var)
    per_chunk = max(1, (1 << 20) // n)
    jobs = [(c, min(per_chunk, reps - s)) for c, s in enumerate(range(0, reps, per_chunk))]

    def run(job):
        c, r = job
        y, _ = _rejection(h, r * n, chunk_rng(seed, n, c))
        return y.reshape(r, n).sum(axis=1)

    sums = np.concatenate(_map(run, jobs, workers))
    return (sums - n * k1) / math.sqrt(n * k2)


def distributional_clt_ks(h: WeightedDensity, n: int, reps: int, seed: int,
                          workers: int = 1, kappa=None) -> float:
    """One-sample KS distance of the standardised sums to the standard normal."""
    if n < 2:
        raise ParameterOutOfDomain("n must be at least 2")
    if reps < 1000:
        raise ParameterOutOfDomain("reps must be at least 1000")
    z = standardised_sums(h, n, reps, seed, workers, kappa)
    return float(stats.kstest(z, "norm").statistic)
