"""Schwartz kernels: Gaussian, super-Gaussian and a kernel with a double zero.

A kernel is ``phi(x) = base(scale * (x - shift))`` where ``base`` is one of

* ``gaussian``:       c * exp(-a u^2)
* ``supergaussian``:  c * exp(-a |u|^alpha),  alpha > 1
* ``zero_at_origin``: c * u^2 * exp(-u^2 / 2)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import eval_hermite, gammaln

from .errors import ConfigError, ParameterOutOfDomain, UnsupportedOrder

FAMILIES = ("gaussian", "supergaussian", "zero_at_origin")

# super-Gaussian exponents accepted without the analysis-only flag
_SMOOTH_ALPHAS = (2.0, 4.0)


@dataclass(frozen=True)
class KernelSpec:
    family: str = "gaussian"
    a: float = 0.5
    alpha: float = 2.0
    c: float = 1.0
    shift: float = 0.0
    scale: float = 1.0
    analysis_only: bool = False

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterOutOfDomain(f"unknown kernel family {self.family!r}")
        if not self.c > 0:
            raise ParameterOutOfDomain("kernel constant c must be > 0")
        if self.family != "zero_at_origin" and not self.a > 0:
            raise ParameterOutOfDomain("kernel rate a must be > 0")
        if not math.isfinite(self.shift):
            raise ParameterOutOfDomain("kernel shift must be finite")
        if self.scale == 0 or not math.isfinite(self.scale):
            raise ParameterOutOfDomain("kernel scale must be finite and nonzero")
        if self.family == "supergaussian":
            if not self.alpha > 1:
                raise ParameterOutOfDomain("super-Gaussian exponent must exceed 1")
            if self.alpha not in _SMOOTH_ALPHAS and not self.analysis_only:
                raise ParameterOutOfDomain(
                    f"super-Gaussian alpha={self.alpha} is not smooth at 0; "
                    "pass analysis_only=True to use it for decay diagnostics"
                )

    # constructors -------------------------------------------------------
    @classmethod
    def gaussian(cls, a: float = 0.5, c: float = 1.0, **kw) -> "KernelSpec":
        return cls("gaussian", a=a, c=c, **kw)

    @classmethod
    def supergaussian(cls, a: float, alpha: float, c: float = 1.0, **kw) -> "KernelSpec":
        return cls("supergaussian", a=a, alpha=alpha, c=c, **kw)

    @classmethod
    def zero_at_origin(cls, c: float = 1.0, **kw) -> "KernelSpec":
        return cls("zero_at_origin", a=0.5, c=c, **kw)

    # properties ---------------------------------------------------------
    @property
    def strictly_positive(self) -> bool:
        return self.family != "zero_at_origin"

    @property
    def decay_order(self) -> float:
        """Order beta of the exponential-type decay condition."""
        if self.family == "supergaussian":
            return self.alpha / (self.alpha - 1.0)
        return 2.0

    @property
    def zero_point(self) -> float | None:
        return self.shift if self.family == "zero_at_origin" else None

    @property
    def width(self) -> float:
        """Rough length scale, used for initial quadrature breakpoints."""
        if self.family == "zero_at_origin":
            return 1.0 / abs(self.scale)
        return 1.0 / (abs(self.scale) * self.a ** (1.0 / self.alpha if self.family == "supergaussian" else 0.5))

    # transforms ---------------------------------------------------------
    def translated(self, a: float) -> "KernelSpec":
        """Kernel ``x -> phi(x - a)``."""
        return replace(self, shift=self.shift + a)

    def rescaled(self, b: float) -> "KernelSpec":
        """Kernel ``x -> phi(b x)``."""
        if b == 0:
            raise ParameterOutOfDomain("scale factor must be nonzero")
        return replace(self, scale=self.scale * b, shift=self.shift / b)

    def pushforward(self, a: float, b: float) -> "KernelSpec":
        """Kernel ``y -> phi((y - a) / b)`` that travels with ``y = b x + a``."""
        if b == 0:
            raise ParameterOutOfDomain("scale factor must be nonzero")
        return replace(self, scale=self.scale / b, shift=a + b * self.shift)

    def with_constant(self, c: float) -> "KernelSpec":
        return replace(self, c=c)

    # evaluation ---------------------------------------------------------
    def _u(self, x):
        return self.scale * (np.asarray(x, dtype=float) - self.shift)

    def log_eval(self, x) -> np.ndarray:
        u = self._u(x)
        logc = math.log(self.c)
        if self.family == "gaussian":
            return logc - self.a * u * u
        if self.family == "supergaussian":
            return logc - self.a * np.abs(u) ** self.alpha
        with np.errstate(divide="ignore"):
            return logc + 2.0 * np.log(np.abs(u)) - 0.5 * u * u

    def __call__(self, x):
        return kernel_eval(self, x)

    def to_dict(self) -> dict:
        return {"family": self.family, "a": self.a, "alpha": self.alpha, "c": self.c,
                "shift": self.shift, "scale": self.scale, "analysis_only": self.analysis_only}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        allowed = {"family", "a", "alpha", "c", "shift", "scale", "analysis_only"}
        unknown = set(d) - allowed
        if unknown:
            raise ConfigError(f"unknown kernel fields: {sorted(unknown)}")
        if d.get("family", "gaussian") not in FAMILIES:
            raise ConfigError(f"unknown kernel family {d['family']!r}")
        return cls(**d)


def kernel_eval(k: KernelSpec, x):
    """phi(x), vectorised.  Returns a float for scalar input."""
    u = k._u(x)
    if k.family == "gaussian":
        out = k.c * np.exp(-k.a * u * u)
    elif k.family == "supergaussian":
        out = k.c * np.exp(-k.a * np.abs(u) ** k.alpha)
    else:
        out = k.c * u * u * np.exp(-0.5 * u * u)
    return float(out) if np.ndim(out) == 0 else out


def _zero_poly_derivative(m: int) -> np.polynomial.Polynomial:
    # d/du [p(u) e^{-u^2/2}] = (p' - u p) e^{-u^2/2}
    p = np.polynomial.Polynomial([0.0, 0.0, 1.0])
    u = np.polynomial.Polynomial([0.0, 1.0])
    for _ in range(m):
        p = p.deriv() - u * p
    return p


def _supergaussian_low(k: KernelSpec, m: int, u):
    a, al = k.a, k.alpha
    au = np.abs(u)
    e = np.exp(-a * au ** al)
    if m == 0:
        return e
    with np.errstate(divide="ignore", invalid="ignore"):
        g1 = a * al * au ** (al - 1)  # derivative of a|u|^alpha for u > 0
        if m == 1:
            return -np.sign(u) * g1 * e
        g2 = a * al * (al - 1) * au ** (al - 2)
        out = (g1 * g1 - g2) * e
    return np.where(au == 0, -2 * a * e if al == 2 else (0.0 if al > 2 else -np.inf), out)


def kernel_derivative(k: KernelSpec, m: int, x):
    """m-th derivative of phi at x, for 0 <= m <= 4.

    Gaussian and zero_at_origin kernels use exact Hermite/polynomial forms.
    Super-Gaussian kernels are exact up to m = 2; orders 3 and 4 come from
    five-point central differences of the exact second derivative with one
    Richardson step.
    """
    if int(m) != m or m < 0 or m > 4:
        raise UnsupportedOrder(f"derivative order must be in 0..4, got {m}")
    m = int(m)
    u = k._u(x)
    chain = k.scale ** m
    if k.family == "gaussian":
        r = math.sqrt(k.a)
        out = k.c * (-r) ** m * eval_hermite(m, r * u) * np.exp(-k.a * u * u)
    elif k.family == "zero_at_origin":
        out = k.c * _zero_poly_derivative(m)(u) * np.exp(-0.5 * u * u)
    elif m <= 2:
        out = k.c * _supergaussian_low(k, m, u)
    else:
        out = k.c * _richardson_fd(lambda v: _supergaussian_low(k, 2, v), m - 2, u)
    out = chain * out
    return float(out) if np.ndim(out) == 0 else out


def _five_point(g, order: int, u, h):
    if order == 1:
        return (g(u - 2 * h) - 8 * g(u - h) + 8 * g(u + h) - g(u + 2 * h)) / (12 * h)
    return (-g(u - 2 * h) + 16 * g(u - h) - 30 * g(u) + 16 * g(u + h) - g(u + 2 * h)) / (12 * h * h)


def _richardson_fd(g, order: int, u):
    u = np.asarray(u, dtype=float)
    h = 1e-4 * (1.0 + np.abs(u))
    coarse = _five_point(g, order, u, h)
    fine = _five_point(g, order, u, h / 2)
    return fine + (fine - coarse) / 15.0


@dataclass(frozen=True)
class GevreyReport:
    k_values: np.ndarray
    m_values: np.ndarray
    sup_table: np.ndarray  # shape (len(m_values), len(k_values))
    beta: float
    fitted_A: np.ndarray  # per m
    fitted_C: np.ndarray  # per m
    finite: bool
    interior: np.ndarray  # sup attained strictly inside the grid


def gevrey_diagnostic(k: KernelSpec, k_max: int, m_max: int,
                      x_max: float = 20.0, step: float = 1e-3) -> GevreyReport:
    """Grid suprema S(k, m) = sup (1+|x|)^k |phi^(m)(x)| and a fitted (A, C_m).

    For each m, A is exp(slope) of the least-squares line through
    ``log S(k, m) - log(k!)/beta`` against k, and C_m the smallest constant
    making ``S <= C_m A^k (k!)^(1/beta)`` hold on every tested k.  This is an
    empirical fit on a finite range, not a proof of the decay condition.
    """
    if k_max > 40 or k_max < 0:
        raise UnsupportedOrder("k_max must lie in 0..40")
    if m_max > 2 or m_max < 0:
        raise UnsupportedOrder("m_max must lie in 0..2")
    x = k.shift + np.arange(-x_max, x_max + step / 2, step)
    ks = np.arange(k_max + 1)
    ms = np.arange(m_max + 1)
    beta = k.decay_order
    log_weight = np.log1p(np.abs(x))
    sup = np.empty((len(ms), len(ks)))
    interior = np.empty_like(sup, dtype=bool)
    for i, m in enumerate(ms):
        d = np.abs(kernel_derivative(k, int(m), x))
        with np.errstate(divide="ignore"):
            logd = np.log(d)
        for j, kk in enumerate(ks):
            vals = kk * log_weight + logd
            idx = int(np.argmax(vals))
            sup[i, j] = math.exp(vals[idx])
            interior[i, j] = 0 < idx < len(x) - 1
    lfact = np.array([gammaln(kk + 1.0) for kk in ks]) / beta
    A = np.empty(len(ms))
    C = np.empty(len(ms))
    for i in range(len(ms)):
        y = np.log(sup[i]) - lfact
        slope = np.polyfit(ks, y, 1)[0] if len(ks) > 1 else 0.0
        A[i] = math.exp(slope)
        C[i] = math.exp(np.max(y - ks * slope))
    finite = bool(np.all(np.isfinite(sup)) and np.all(np.isfinite(A)) and np.all(np.isfinite(C)))
    return GevreyReport(ks, ms, sup, beta, A, C, finite, interior)
