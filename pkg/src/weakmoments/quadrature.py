"""Adaptive Gauss-Kronrod integration over intervals and the whole real line.

Integrands are vectorised callables ``f(x: ndarray) -> ndarray``.  Whole-line
integrals are truncated to the window where a caller-supplied decay witness
(usually the kernel times a polynomial envelope) stays above
``QuadratureConfig.tail_cut_threshold``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import InvalidInterval, NonConvergence, ParameterOutOfDomain

# 21-point Kronrod extension of the 10-point Gauss rule (QUADPACK qk21).
_XGK = np.array([
    0.995657163025808080735527280689003,
    0.973906528517171720077964012084452,
    0.930157491355708226001207180059508,
    0.865063366688984510732096688423493,
    0.780817726586416897063717578345042,
    0.679409568299024406234327365114874,
    0.562757134668604683339000099272694,
    0.433395394129247190799265943165784,
    0.294392862701460198131126603103866,
    0.148874338981631210884826001129720,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.011694638867371874278064396062192,
    0.032558162307964727478818972459390,
    0.054755896574351996031381300244580,
    0.075039674810919952767043140916190,
    0.093125454583697605535065465083366,
    0.109387158802297641899210590325805,
    0.123491976262065851077208745178845,
    0.134709217311473325928054001771707,
    0.142775938577060080797094273138717,
    0.147739104901338491374841515972068,
    0.149445554002916905664936468389821,
])
_WG = np.array([
    0.066671344308688137593568809893332,
    0.149451349150580593145776339657697,
    0.219086362515982043995534934228163,
    0.269266719309996355091226921569469,
    0.295524224714752870173892994651338,
])

# Full symmetric layout: -x0 .. -x9, 0, x9 .. x0.
NODES = np.concatenate([-_XGK[:10], [0.0], _XGK[9::-1]])
KRONROD_WEIGHTS = np.concatenate([_WGK[:10], [_WGK[10]], _WGK[9::-1]])
GAUSS_WEIGHTS = np.zeros(21)
_gauss_pos = [1, 3, 5, 7, 9]
for _i, _w in zip(_gauss_pos, _WG):
    GAUSS_WEIGHTS[_i] = _w
    GAUSS_WEIGHTS[20 - _i] = _w

_EPS = np.finfo(float).eps
_TINY = np.finfo(float).tiny
_ROUNDOFF = 100.0 * _EPS

# Offsets scanned when locating the truncation window.
_WINDOW_OFFSETS = np.concatenate([[0.0], np.geomspace(1e-3, 1e6, 3000)])


@dataclass(frozen=True)
class QuadratureConfig:
    abs_tol: float = 1e-10
    rel_tol: float = 1e-8
    max_subdivisions: int = 2000
    tail_cut_threshold: float = 1e-18

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise ParameterOutOfDomain(f"abs_tol must be > 0, got {self.abs_tol}")
        if not self.rel_tol > 0:
            raise ParameterOutOfDomain(f"rel_tol must be > 0, got {self.rel_tol}")
        if int(self.max_subdivisions) != self.max_subdivisions or self.max_subdivisions < 1:
            raise ParameterOutOfDomain("max_subdivisions must be an integer >= 1")
        if not 0 < self.tail_cut_threshold < 1:
            raise ParameterOutOfDomain("tail_cut_threshold must lie in (0, 1)")


DEFAULT_CONFIG = QuadratureConfig()


@dataclass(frozen=True)
class IntegralResult:
    value: float | complex
    error_estimate: float
    subdivisions_used: int


def truncation_window(witness: Callable, center: float, threshold: float) -> tuple[float, float]:
    """Return ``(lo, hi)`` outside which ``witness`` stays below ``threshold``.

    The witness is scanned on a geometric grid of offsets around ``center``;
    the window edge is the first grid offset past the last point where the
    witness reaches the threshold.
    """
    edges = []
    for sign in (-1.0, 1.0):
        w = np.asarray(witness(center + sign * _WINDOW_OFFSETS), dtype=float)
        w = np.nan_to_num(np.abs(w), nan=0.0)
        above = np.nonzero(w >= threshold)[0]
        if above.size == 0:
            edges.append(0.0)
            continue
        last = above[-1]
        if last >= len(_WINDOW_OFFSETS) - 1:
            raise InvalidInterval("decay witness does not fall below the tail threshold")
        edges.append(_WINDOW_OFFSETS[last + 1])
    return center - edges[0], center + edges[1]


def _panel_estimates(fv: np.ndarray, half: np.ndarray):
    """QUADPACK qk21 value and error heuristics for rows of real samples."""
    resk = fv @ KRONROD_WEIGHTS
    resg = fv @ GAUSS_WEIGHTS
    resabs = np.abs(fv) @ KRONROD_WEIGHTS
    resasc = np.abs(fv - 0.5 * resk[:, None]) @ KRONROD_WEIGHTS
    err = np.abs(resk - resg) * half
    resasc = resasc * half
    resabs = resabs * half
    with np.errstate(divide="ignore", invalid="ignore"):
        scaled = resasc * np.minimum(1.0, (200.0 * err / resasc) ** 1.5)
    err = np.where((resasc > 0) & (err > 0), scaled, err)
    floor = 50.0 * _EPS * resabs
    err = np.where(resabs > _TINY / (50.0 * _EPS), np.maximum(err, floor), err)
    return resk * half, err, resabs


def _evaluate(f, a: np.ndarray, b: np.ndarray, is_complex: bool):
    center = 0.5 * (a + b)
    half = 0.5 * (b - a)
    x = center[:, None] + half[:, None] * NODES[None, :]
    fv = np.asarray(f(x.ravel())).reshape(x.shape)
    if is_complex:
        fv = fv.astype(complex)
        vr, er, ar = _panel_estimates(fv.real, half)
        vi, ei, ai = _panel_estimates(fv.imag, half)
        return vr + 1j * vi, er + ei, ar + ai
    if np.iscomplexobj(fv):
        raise TypeError("integrand returned complex values; use integrate_complex")
    return _panel_estimates(fv.astype(float), half)


def _initial_breaks(lo: float, hi: float, points: Sequence[float], frequency: float) -> np.ndarray:
    inner = [p for p in points if lo < p < hi]
    breaks = np.unique(np.concatenate([[lo, hi], np.asarray(inner, dtype=float)]))
    if frequency:
        cap = math.pi / abs(frequency)
        refined = [breaks[0]]
        for left, right in zip(breaks[:-1], breaks[1:]):
            pieces = max(1, math.ceil((right - left) / cap))
            refined.extend(np.linspace(left, right, pieces + 1)[1:])
        breaks = np.asarray(refined)
    if len(breaks) < 5:
        breaks = np.linspace(lo, hi, 5)
    return breaks


def _adaptive(f, lo, hi, cfg: QuadratureConfig, points, frequency, is_complex) -> IntegralResult:
    breaks = _initial_breaks(lo, hi, points, frequency)
    a, b = breaks[:-1].copy(), breaks[1:].copy()
    val, err, mass = _evaluate(f, a, b, is_complex)
    used = 0
    while True:
        total = val.sum()
        err_total = float(err.sum())
        # cancelling integrands cannot beat the rounding level of int |f|
        tol = max(cfg.abs_tol, cfg.rel_tol * abs(total), _ROUNDOFF * float(mass.sum()))
        if err_total <= tol:
            return IntegralResult(complex(total) if is_complex else float(total), err_total, used)
        remaining = cfg.max_subdivisions - used
        if remaining <= 0:
            raise NonConvergence(
                f"error estimate {err_total:.3e} above target {tol:.3e} "
                f"after {used} subdivisions on [{lo:.6g}, {hi:.6g}]"
            )
        budget = tol / len(val)
        order = np.argsort(err)[::-1]
        pick = order[err[order] > budget][:remaining]
        if pick.size == 0:
            pick = order[:1]
        mid = 0.5 * (a[pick] + b[pick])
        if np.any((mid <= a[pick]) | (mid >= b[pick])):
            raise NonConvergence("panel width reached floating-point resolution")
        new_a = np.concatenate([a[pick], mid])
        new_b = np.concatenate([mid, b[pick]])
        new_val, new_err, new_mass = _evaluate(f, new_a, new_b, is_complex)
        keep = np.ones(len(val), dtype=bool)
        keep[pick] = False
        a = np.concatenate([a[keep], new_a])
        b = np.concatenate([b[keep], new_b])
        val = np.concatenate([val[keep], new_val])
        err = np.concatenate([err[keep], new_err])
        mass = np.concatenate([mass[keep], new_mass])
        used += pick.size


def _resolve_support(support, cfg, witness, center):
    lo, hi = float(support[0]), float(support[1])
    if math.isnan(lo) or math.isnan(hi) or not lo < hi:
        raise InvalidInterval(f"invalid interval ({lo}, {hi})")
    if math.isinf(lo) or math.isinf(hi):
        if witness is None:
            raise InvalidInterval("infinite support requires a decay witness")
        w_lo, w_hi = truncation_window(witness, center, cfg.tail_cut_threshold)
        lo, hi = max(lo, w_lo), min(hi, w_hi)
    return lo, hi


def integrate(
    f: Callable,
    support=(-math.inf, math.inf),
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    *,
    witness: Callable | None = None,
    center: float = 0.0,
    points: Sequence[float] = (),
    frequency: float = 0.0,
) -> IntegralResult:
    """Integrate a real vectorised ``f`` over ``support``.

    ``witness`` bounds ``|f|`` up to a bounded factor and controls where an
    infinite support is truncated; ``points`` are forced initial breakpoints;
    ``frequency`` caps the initial panel width at ``pi/|frequency|``.

    Raises NonConvergence when the subdivision budget runs out and
    InvalidInterval for empty or unbounded-without-witness supports.
    """
    lo, hi = _resolve_support(support, cfg, witness, center)
    if lo >= hi:
        return IntegralResult(0.0, 0.0, 0)
    return _adaptive(f, lo, hi, cfg, points, frequency, is_complex=False)


def integrate_complex(
    f: Callable,
    support=(-math.inf, math.inf),
    cfg: QuadratureConfig = DEFAULT_CONFIG,
    *,
    witness: Callable | None = None,
    center: float = 0.0,
    points: Sequence[float] = (),
    frequency: float = 0.0,
) -> IntegralResult:
    """Complex counterpart of :func:`integrate`; both parts share one subdivision."""
    lo, hi = _resolve_support(support, cfg, witness, center)
    if lo >= hi:
        return IntegralResult(0j, 0.0, 0)
    return _adaptive(f, lo, hi, cfg, points, frequency, is_complex=True)


def gauss_legendre_panels(breaks: np.ndarray, order: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights over consecutive ``breaks``."""
    x, w = np.polynomial.legendre.leggauss(order)
    breaks = np.asarray(breaks, dtype=float)
    center = 0.5 * (breaks[1:] + breaks[:-1])
    half = 0.5 * (breaks[1:] - breaks[:-1])
    nodes = (center[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights
