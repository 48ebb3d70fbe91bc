"""Kernel-weighted expectations, weak moments, weak CF/CGF and weak cumulants.

A :class:`WeakPair` couples a distributional component with a kernel and a
quadrature configuration.  Everything here is a pure function of the pair.

Cumulants are stored in the real convention: ``kappa_n`` is the coefficient of
``(it)^n / n!`` in ``log(cf(t) / cf(0))``, so that real data give real cumulants.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np

from .distributions import Atom, Density, GeneralizedDistribution, Mixture, atom_pairing
from .errors import BranchAmbiguity, ParameterOutOfDomain, ZeroCrossing, ZeroNormalisation
from .kernels import KernelSpec
from .quadrature import DEFAULT_CONFIG, QuadratureConfig, integrate, integrate_complex

NORMALISATION_TOL = 1e-8
ZERO_CF_THRESHOLD = 1e-12
MAX_CUMULANT_ORDER = 12


@dataclass(frozen=True)
class WeakPair:
    dist: GeneralizedDistribution
    kernel: KernelSpec = field(default_factory=KernelSpec)
    quad: QuadratureConfig = DEFAULT_CONFIG
    normalised: bool = False

    def __post_init__(self):
        if self.normalised:
            m0 = weak_moment(self, 0)
            if abs(m0 - 1.0) > NORMALISATION_TOL:
                raise ParameterOutOfDomain(f"pair declared normalised but <T, phi> = {m0!r}")

    def with_quad(self, quad: QuadratureConfig) -> "WeakPair":
        return replace(self, quad=quad)


@dataclass(frozen=True)
class MomentSequence:
    values: np.ndarray
    kernel: KernelSpec
    normalised: bool = False

    @property
    def order(self) -> int:
        return len(self.values) - 1

    def __getitem__(self, n):
        return self.values[n]


@dataclass(frozen=True)
class CumulantSequence:
    values: np.ndarray  # kappa_1 .. kappa_N
    base_normalisation: float

    def kappa(self, n: int) -> float:
        return float(self.values[n - 1])


@dataclass(frozen=True)
class TransformGrid:
    t_values: np.ndarray
    cf_values: np.ndarray
    cgf_values: np.ndarray | None = None
    branch_windings: np.ndarray | None = None

    @property
    def center_index(self) -> int:
        return len(self.t_values) // 2


# --- weak expectation --------------------------------------------------------

def _as_array_fn(psi: Callable) -> Callable:
    def wrapped(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(psi(x)) * np.ones_like(x)
    return wrapped


def _pair_component(dist, g, kernel: KernelSpec, quad, degree, frequency, points, is_complex):
    if isinstance(dist, Atom):
        return atom_pairing(dist.location, dist.weight, g)
    if isinstance(dist, Mixture):
        return sum(w * _pair_component(d, g, kernel, quad, degree, frequency, points, is_complex)
                   for w, d in dist.components)
    if not isinstance(dist, Density):
        raise ParameterOutOfDomain(f"unsupported distribution object {dist!r}")

    def integrand(x):
        return g(x) * dist.pdf(x)

    def witness(x):
        return np.exp(degree * np.log1p(np.abs(x)) + kernel.log_eval(x))

    w = kernel.width
    marks = list(dist.landmarks()) + [kernel.shift + k * w for k in (-3, -1, 0, 1, 3)] + list(points)
    run = integrate_complex if is_complex else integrate
    return run(integrand, cfg=quad, witness=witness, center=kernel.shift,
               points=marks, frequency=frequency).value


def weak_expectation(p: WeakPair, psi: Callable, *, degree: int = 0,
                     frequency: float = 0.0, points=()) -> float | complex:
    """``<T, psi * phi>``.

    ``degree`` is the polynomial growth order of ``|psi|`` (it widens the tail
    truncation window), ``frequency`` the oscillation rate of ``psi`` if any,
    and ``points`` extra quadrature breakpoints such as a sharp transition.
    """
    psi = _as_array_fn(psi)
    kernel = p.kernel

    def g(x):
        return psi(x) * kernel(x)

    is_complex = bool(np.iscomplexobj(psi(np.array([0.0, 1.0]))))
    return _pair_component(p.dist, g, kernel, p.quad, degree, frequency, points, is_complex)


def weak_moment(p: WeakPair, n: int) -> float:
    if int(n) != n or n < 0:
        raise ParameterOutOfDomain("moment order must be a nonnegative integer")
    n = int(n)
    return float(weak_expectation(p, lambda x: x ** n, degree=n))


def weak_moments(p: WeakPair, N: int) -> MomentSequence:
    values = np.array([weak_moment(p, n) for n in range(N + 1)])
    return MomentSequence(values, p.kernel, p.normalised)


def normalise(p: WeakPair) -> WeakPair:
    """The pair with kernel divided by ``<T, phi>`` so that the total mass is 1."""
    m0 = weak_moment(p, 0)
    if m0 == 0 or abs(m0) < ZERO_CF_THRESHOLD:
        raise ZeroNormalisation("<T, phi> vanishes; the pair cannot be normalised")
    if m0 < 0:
        raise ParameterOutOfDomain("<T, phi> is negative; the pair cannot be normalised")
    return replace(p, kernel=p.kernel.with_constant(p.kernel.c / m0), normalised=True)


# --- transforms --------------------------------------------------------------

def weak_cf(p: WeakPair, t: float) -> complex:
    t = float(t)
    return complex(weak_expectation(p, lambda x: np.exp(1j * t * x), frequency=t))


def weak_cf_values(p: WeakPair, ts, workers: int = 1) -> np.ndarray:
    ts = np.asarray(ts, dtype=float)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return np.array(list(pool.map(lambda t: weak_cf(p, t), ts)))
    return np.array([weak_cf(p, t) for t in ts])


def symmetric_grid(T_max: float, n_points: int) -> np.ndarray:
    if n_points < 1 or n_points % 2 == 0:
        raise ParameterOutOfDomain("n_points must be odd so that the grid contains t = 0")
    t = np.linspace(-T_max, T_max, n_points)
    t[n_points // 2] = 0.0
    half = t[n_points // 2 + 1:]
    t[: n_points // 2] = -half[::-1]
    return t


def weak_cf_grid(p: WeakPair, T_max: float, n_points: int, workers: int = 1) -> TransformGrid:
    t = symmetric_grid(T_max, n_points)
    return TransformGrid(t, weak_cf_values(p, t, workers))


def _continue_arg(side: np.ndarray) -> np.ndarray:
    step = np.diff(side)
    step = (step + math.pi) % (2 * math.pi) - math.pi
    if np.any(np.abs(step) > math.pi / 2):
        raise BranchAmbiguity("argument jumps by more than pi/2 between grid points; refine the grid")
    return side[0] + np.concatenate([[0.0], np.cumsum(step)])


def unwrap_log(cf: np.ndarray, center: int) -> tuple[np.ndarray, np.ndarray]:
    """Branch-continuous ``log cf`` walking outward from ``cf[center]``.

    Returns (log values, winding counts relative to the principal branch).
    """
    cf = np.asarray(cf, dtype=complex)
    mod = np.abs(cf)
    bad = np.nonzero(mod <= ZERO_CF_THRESHOLD)[0]
    if bad.size:
        raise ZeroCrossing(f"|cf| <= {ZERO_CF_THRESHOLD} at grid index {int(bad[0])}; log undefined there")
    principal = np.angle(cf)
    arg = np.empty_like(principal)
    arg[center:] = _continue_arg(principal[center:])
    arg[center::-1] = _continue_arg(principal[center::-1])
    windings = np.rint((arg - principal) / (2 * math.pi)).astype(int)
    return np.log(mod) + 1j * arg, windings


def weak_cgf(grid: TransformGrid) -> TransformGrid:
    """Fill the grid's CGF with the branch-continuous logarithm of its CF."""
    t = grid.t_values
    n = len(t)
    if n % 2 == 0 or t[n // 2] != 0.0 or not np.allclose(t, -t[::-1], rtol=0, atol=1e-15 * max(1.0, np.abs(t).max())):
        raise ParameterOutOfDomain("CGF unwrapping needs a symmetric grid with t = 0 at its centre")
    cgf, wind = unwrap_log(grid.cf_values, n // 2)
    return replace(grid, cgf_values=cgf, branch_windings=wind)


def weak_cgf_at(p: WeakPair, u: float, max_step: float = 0.05) -> complex:
    """Branch-continuous ``log cf(u)``, continued along a path from 0."""
    m = max(2, math.ceil(abs(u) / max_step) + 1)
    path = np.linspace(0.0, u, m)
    cgf, _ = unwrap_log(weak_cf_values(p, path), 0)
    return complex(cgf[-1])


# --- cumulants ---------------------------------------------------------------

def cumulants_from_moments(moments) -> np.ndarray:
    """kappa_1..kappa_N from m_0..m_N via the normalised moment recursion."""
    m = np.asarray(moments, dtype=float)
    if m[0] == 0 or abs(m[0]) < ZERO_CF_THRESHOLD:
        raise ZeroNormalisation("m_0 vanishes; cumulants are undefined")
    mp = m / m[0]
    N = len(m) - 1
    kappa = np.zeros(N + 1)
    for n in range(1, N + 1):
        acc = mp[n]
        for k in range(1, n):
            acc -= math.comb(n - 1, k - 1) * kappa[k] * mp[n - k]
        kappa[n] = acc
    return kappa[1:]


def moments_from_cumulants(kappa, m0: float = 1.0) -> np.ndarray:
    kappa = np.concatenate([[0.0], np.asarray(kappa, dtype=float)])
    N = len(kappa) - 1
    mp = np.zeros(N + 1)
    mp[0] = 1.0
    for n in range(1, N + 1):
        mp[n] = sum(math.comb(n - 1, k - 1) * kappa[k] * mp[n - k] for k in range(1, n + 1))
    return m0 * mp


def weak_cumulants(p: WeakPair, N: int) -> CumulantSequence:
    if N < 1 or N > MAX_CUMULANT_ORDER:
        raise ParameterOutOfDomain(f"cumulant order must lie in 1..{MAX_CUMULANT_ORDER}")
    m = weak_moments(p, N).values
    return CumulantSequence(cumulants_from_moments(m), float(m[0]))


# --- affine maps and independent sums ---------------------------------------

def translate_pair(p: WeakPair, a: float) -> WeakPair:
    """Pair of ``X + a``: shifted distribution and kernel ``phi(x - a)``."""
    return replace(p, dist=p.dist.affine(a, 1.0), kernel=p.kernel.translated(a))


def scale_pair(p: WeakPair, b: float) -> WeakPair:
    """Pair of ``b X``, defined by ``E_b[psi] = E[psi(b .)]``.

    The kernel travels with the variable, ``x -> phi(x / b)``.
    """
    if b == 0 or not math.isfinite(b):
        raise ParameterOutOfDomain("scale factor must be finite and nonzero")
    return replace(p, dist=p.dist.affine(0.0, b), kernel=p.kernel.pushforward(0.0, b))


def sum_cf(p1: WeakPair, p2: WeakPair, t: float) -> complex:
    """Weak CF of the independent sum under the product pair."""
    return weak_cf(p1, t) * weak_cf(p2, t)


def sum_moments(p1: WeakPair, p2: WeakPair, N: int) -> np.ndarray:
    """Weak moments of the independent sum: ``<T1 x T2, (x+y)^n phi1 phi2>``."""
    a = weak_moments(p1, N).values
    b = weak_moments(p2, N).values
    return np.array([sum(math.comb(n, k) * a[k] * b[n - k] for k in range(n + 1)) for n in range(N + 1)])


def sum_cumulants(p1: WeakPair, p2: WeakPair, N: int) -> CumulantSequence:
    m = sum_moments(p1, p2, N)
    return CumulantSequence(cumulants_from_moments(m), float(m[0]))


# --- finite differences ------------------------------------------------------

@lru_cache(maxsize=None)
def central_stencil(deriv: int, accuracy: int = 4) -> tuple[tuple[int, ...], tuple[Fraction, ...]]:
    """Offsets and exact weights of the central difference for ``f^(deriv)``."""
    half = (deriv - 1) // 2 + accuracy // 2
    offsets = list(range(-half, half + 1))
    size = len(offsets)
    A = [[Fraction(o) ** r for o in offsets] for r in range(size)]
    rhs = [Fraction(math.factorial(deriv)) if r == deriv else Fraction(0) for r in range(size)]
    # Gauss-Jordan elimination over the rationals
    M = [row[:] + [rhs[i]] for i, row in enumerate(A)]
    for col in range(size):
        piv = next(r for r in range(col, size) if M[r][col] != 0)
        M[col], M[piv] = M[piv], M[col]
        pv = M[col][col]
        M[col] = [v / pv for v in M[col]]
        for r in range(size):
            if r != col and M[r][col] != 0:
                fac = M[r][col]
                M[r] = [vr - fac * vc for vr, vc in zip(M[r], M[col])]
    return tuple(offsets), tuple(M[r][-1] for r in range(size))


def finite_difference(values_at: Callable, x0: float, deriv: int, h: float, accuracy: int = 4):
    offsets, weights = central_stencil(deriv, accuracy)
    pts = x0 + h * np.array(offsets, dtype=float)
    vals = np.asarray(values_at(pts))
    return sum(float(w) * v for w, v in zip(weights, vals)) / h ** deriv


def cf_derivative_at_zero(p: WeakPair, n: int, h: float = 1e-2) -> complex:
    """Fourth-order central difference of the weak CF at 0 (approximates i^n m_n)."""
    if n == 0:
        return weak_cf(p, 0.0)
    return complex(finite_difference(lambda ts: weak_cf_values(p, ts), 0.0, n, h))


# --- serialisation -----------------------------------------------------------

GRID_COLUMNS = ("t", "re_cf", "im_cf", "re_cgf", "im_cgf", "winding")


def moments_to_dict(ms: MomentSequence) -> dict:
    return {"values": [float(v) for v in ms.values], "kernel": ms.kernel.to_dict(),
            "normalised": ms.normalised}


def moments_from_dict(d: dict) -> MomentSequence:
    return MomentSequence(np.array(d["values"], dtype=float), KernelSpec.from_dict(d["kernel"]),
                          bool(d.get("normalised", False)))


def cumulants_to_dict(cs: CumulantSequence) -> dict:
    return {"values": [float(v) for v in cs.values], "base_normalisation": cs.base_normalisation}


def grid_rows(grid: TransformGrid) -> list[tuple]:
    """Rows matching GRID_COLUMNS; CGF columns are NaN and windings 0 when absent."""
    n = len(grid.t_values)
    cgf = grid.cgf_values if grid.cgf_values is not None else np.full(n, np.nan + 0j)
    wind = grid.branch_windings if grid.branch_windings is not None else np.zeros(n, dtype=int)
    return [(float(t), c.real, c.imag, g.real, g.imag, int(w))
            for t, c, g, w in zip(grid.t_values, grid.cf_values, cgf, wind)]


def grid_to_dict(grid: TransformGrid) -> dict:
    return {"columns": list(GRID_COLUMNS), "rows": [list(r) for r in grid_rows(grid)]}


def grid_from_dict(d: dict) -> TransformGrid:
    rows = np.array(d["rows"], dtype=float)
    t = rows[:, 0]
    cf = rows[:, 1] + 1j * rows[:, 2]
    cgf = rows[:, 3] + 1j * rows[:, 4]
    has_cgf = not np.all(np.isnan(cgf.real))
    return TransformGrid(t, cf, cgf if has_cgf else None,
                         rows[:, 5].astype(int) if has_cgf else None)
