import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from weakmoments.errors import ConfigError, ParameterOutOfDomain, UnsupportedOrder
from weakmoments.kernels import KernelSpec, gevrey_diagnostic, kernel_derivative, kernel_eval

GAUSS = KernelSpec.gaussian()


def test_values():
    assert kernel_eval(GAUSS, 0.0) == 1.0
    assert kernel_eval(GAUSS, 2.0) == pytest.approx(math.exp(-2), rel=1e-15)
    assert kernel_eval(KernelSpec.zero_at_origin(), 0.0) == 0.0


def test_low_order_derivatives():
    assert kernel_derivative(GAUSS, 1, 0.0) == 0.0
    assert kernel_derivative(GAUSS, 2, 0.0) == pytest.approx(-1.0, abs=1e-15)
    sg = KernelSpec.supergaussian(a=1.0, alpha=4.0)
    assert kernel_derivative(sg, 1, 1.0) == pytest.approx(-4 * math.exp(-1), rel=1e-12)


def _symbolic(expr, u, m, xs):
    d = sp.lambdify(u, sp.diff(expr, u, m), "mpmath")
    return np.array([float(d(sp.Float(x, 30))) for x in xs])


@pytest.mark.parametrize("m", range(5))
def test_derivatives_match_symbolic(m):
    u = sp.symbols("u", real=True)
    xs = [-2.3, -0.7, 0.4, 1.9, 3.1]
    cases = [
        (KernelSpec.gaussian(a=0.8, c=1.5, shift=0.3, scale=1.2), 1e-12),
        (KernelSpec.zero_at_origin(c=2.0, shift=-0.5), 1e-12),
        (KernelSpec.supergaussian(a=0.5, alpha=4.0), 1e-12 if m <= 2 else 1e-6),
    ]
    for k, tol in cases:
        v = k.scale * (u - k.shift)
        if k.family == "gaussian":
            expr = k.c * sp.exp(-k.a * v ** 2)
        elif k.family == "zero_at_origin":
            expr = k.c * v ** 2 * sp.exp(-v ** 2 / 2)
        else:
            expr = k.c * sp.exp(-k.a * v ** 4)
        want = _symbolic(expr, u, m, xs)
        got = kernel_derivative(k, m, np.array(xs))
        assert np.allclose(got, want, rtol=tol, atol=tol), (k.family, m)


def test_derivative_order_limit():
    with pytest.raises(UnsupportedOrder):
        kernel_derivative(GAUSS, 5, 0.0)


def test_construction_guards():
    with pytest.raises(ParameterOutOfDomain):
        KernelSpec.gaussian(a=-1)
    with pytest.raises(ParameterOutOfDomain):
        KernelSpec.supergaussian(a=1.0, alpha=1.5)
    KernelSpec.supergaussian(a=1.0, alpha=1.5, analysis_only=True)
    with pytest.raises(ConfigError):
        KernelSpec.from_dict({"family": "gaussian", "width": 2})
    assert KernelSpec.from_dict(GAUSS.to_dict()) == GAUSS


def test_gevrey_gaussian():
    rep = gevrey_diagnostic(GAUSS, 10, 0)
    assert rep.finite and rep.interior.all()
    assert rep.fitted_A[0] <= 2.0
    assert rep.beta == 2.0


def test_gevrey_zero_kernel_sup():
    rep = gevrey_diagnostic(KernelSpec.zero_at_origin(), 0, 0)
    assert rep.sup_table[0, 0] == pytest.approx(2 * math.exp(-1), rel=1e-6)


def test_gevrey_analysis_only_supergaussian():
    k = KernelSpec.supergaussian(a=1.0, alpha=1.5, analysis_only=True)
    rep = gevrey_diagnostic(k, 10, 0)
    assert rep.beta == pytest.approx(3.0)
    assert rep.finite and np.isfinite(rep.fitted_A[0])


def test_rapid_decay_to_order_twenty():
    for k in (GAUSS, KernelSpec.supergaussian(a=1.0, alpha=4.0), KernelSpec.zero_at_origin()):
        rep = gevrey_diagnostic(k, 20, 0)
        assert rep.finite and rep.interior.all()


@settings(max_examples=50, deadline=None)
@given(st.floats(-20, 20))
def test_positive_families_stay_positive(x):
    assert kernel_eval(KernelSpec.gaussian(a=0.01), x) > 0
    assert kernel_eval(KernelSpec.supergaussian(a=1e-3, alpha=4.0), x) > 0


@settings(max_examples=60, deadline=None)
@given(st.floats(-5, 5), st.floats(-5, 5), st.floats(0.2, 4.0))
def test_shift_and_scale_consistency(x, a, b):
    k = KernelSpec.gaussian(a=0.7)
    assert k.translated(a)(x) == pytest.approx(k(x - a), rel=1e-12, abs=1e-300)
    assert k.rescaled(b)(x) == pytest.approx(k(b * x), rel=1e-12, abs=1e-300)
    z = KernelSpec.zero_at_origin()
    assert z.translated(a)(x) == pytest.approx(z(x - a), rel=1e-12, abs=1e-300)
