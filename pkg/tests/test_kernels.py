import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlab.kernels import (Anisotropic, GaussianBounded, KernelError, Newtonian, PowerSum, Riesz,
                           Tabulated, check_essential_convexity, fourier_estimate, is_certified,
                           load_tabulated, make_kernel, representation_reconstruct, sphere_area,
                           sphere_mean_cos)


def riesz_fourier(d, b, q):
    """Closed-form transform of -|x|^b/b under the e^{-2πixξ} convention."""
    a = -b
    c = math.pi ** (a - d / 2) * math.gamma((d - a) / 2) / math.gamma(a / 2)
    return (1 / a) * c * q ** (a - d)


def central_laplacian(k, x, h=1e-4):
    x = np.asarray(x, float)
    total = 0.0
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        total += (k.value(x + e) - 2 * k.value(x) + k.value(x - e)) / h ** 2
    return float(np.squeeze(total))


def test_riesz_value_and_laplacian_1d():
    k = Riesz(1, -0.5)
    assert float(k.value(np.array([1.0]))) == pytest.approx(2.0)
    lap = float(k.laplacian(np.array([2.0])))
    assert lap == pytest.approx(central_laplacian(k, [2.0]), rel=1e-6)
    assert lap == pytest.approx(0.26516504294495535, rel=1e-12)


@pytest.mark.parametrize("k,x", [
    (Riesz(3, -2.0), [0.3, -0.4, 1.1]),
    (PowerSum(3, ((1.0, -2.5), (1.0, -2.2))), [0.7, 0.2, 0.1]),
    (Newtonian(3), [0.5, 0.5, 0.5]),
    (GaussianBounded(2, scale=0.8, cos_freq=3.0), [0.4, 0.3]),
    (Anisotropic(2, b=-1.5, alpha=0.2, coeffs=(1, 0, 0, 0, 1)), [0.6, 0.35]),
    (Anisotropic(3, b=-2.0, alpha=0.1, coeffs=(1, 0, 1)), [0.3, 0.5, 0.4]),
])
def test_laplacian_matches_finite_differences(k, x):
    assert float(np.squeeze(k.laplacian(np.array(x)))) == pytest.approx(
        central_laplacian(k, x), rel=1e-5, abs=1e-7)


def test_newtonian_is_harmonic():
    k = Newtonian(3)
    x = np.array([[1.0, 2.0, 0.5], [0.1, 0.0, 0.0]])
    np.testing.assert_array_equal(k.laplacian(x), 0.0)
    assert float(k.value(np.array([1.0, 0, 0]))) == pytest.approx(1 / (4 * math.pi))


def test_parameter_errors():
    with pytest.raises(KernelError, match="b out of"):
        Riesz(3, 0.5)
    with pytest.raises(KernelError, match="b out of"):
        Riesz(1, -1.0)
    with pytest.raises(KernelError, match="singular point"):
        Riesz(1, -0.5).laplacian(np.array([0.0]))
    with pytest.raises(KernelError, match="odd harmonics"):
        Anisotropic(2, b=-1.0, alpha=0.1, coeffs=(1, 1))
    with pytest.raises(KernelError):
        make_kernel("nope", 1)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=2, max_size=2).filter(lambda v: np.hypot(*v) > 1e-3))
def test_kernels_are_even(v):
    x = np.array(v)
    for k in (Riesz(2, -1.0), GaussianBounded(2, cos_freq=2.0),
              Anisotropic(2, b=-1.5, alpha=0.3, coeffs=(1, 0, 0.5, 0, 0.25))):
        assert float(k.value(x)) == pytest.approx(float(k.value(-x)), rel=1e-13)


def test_tabulated_kernel(tmp_path):
    p = tmp_path / "w.csv"
    r = np.linspace(0, 3, 31)
    np.savetxt(p, np.column_stack([r, np.exp(-r)]), delimiter=",")
    k = load_tabulated(p, 1)
    assert isinstance(k, Tabulated)
    assert float(k.value(np.array([1.05]))) == pytest.approx(math.exp(-1.05), rel=1e-3)
    assert float(k.value(np.array([10.0]))) == pytest.approx(math.exp(-3))
    with pytest.raises(KernelError, match="insufficient smoothness data"):
        k.laplacian(np.array([1.0]))
    with pytest.raises(KernelError, match="insufficient smoothness data"):
        check_essential_convexity(k)


def test_certificate_riesz_3d():
    cert = check_essential_convexity(Riesz(3, -2.0))
    assert cert.is_essentially_convex
    assert cert.b_near == pytest.approx(-2.0, abs=1e-6)
    assert cert.a_far == pytest.approx(-2.0, abs=1e-6)
    assert cert.min_laplacian_samples > 0
    d = cert.to_dict()
    assert set(d["exponent_fit"]) == {"near", "far"}


def test_certificate_rejects_subharmonic_riesz():
    cert = check_essential_convexity(Riesz(3, -0.5))
    assert not cert.is_essentially_convex
    assert not cert.checks["laplacian_positive"]
    assert not cert.checks["near_exponent"]
    assert cert.violations


def test_certificate_other_kernels():
    assert is_certified(PowerSum(3, ((1.0, -2.5), (1.0, -2.2))))
    assert is_certified(Riesz(1, -0.5))
    assert not is_certified(Newtonian(3))
    assert not is_certified(GaussianBounded(1))


def anisotropic_convex(alpha, b=-1.5):
    # ΔW = r^{b-2}[-b(1+α(1+c)) - (α/b)(-16c)], c = cos 4θ; minimum at c = 1
    return -b * (1 + 2 * alpha) + 16 * alpha / b > 0


@pytest.mark.parametrize("alpha", [0.05, 0.1, 0.19, 0.2, 0.3, 0.5])
def test_anisotropic_certificate_matches_closed_form(alpha):
    k = Anisotropic(2, b=-1.5, alpha=alpha, coeffs=(1, 0, 0, 0, 1))
    assert is_certified(k) == anisotropic_convex(alpha)


def test_sphere_mean_cos():
    assert sphere_mean_cos(3, 2.0) == pytest.approx(math.sin(2.0) / 2.0)
    assert sphere_mean_cos(2, 1e-4) == pytest.approx(1.0)
    # d = 2 against a direct angular average
    t = np.linspace(0, 2 * math.pi, 20001)[:-1]
    assert sphere_mean_cos(2, 1.7) == pytest.approx(np.mean(np.cos(1.7 * np.cos(t))), rel=1e-10)
    assert sphere_area(3) == pytest.approx(4 * math.pi)


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0])
def test_representation_riesz_3d(x):
    k = Riesz(3, -2.0)
    exact = float(k.value(np.array([x, 0, 0])))
    got = representation_reconstruct(k, [x, 0, 0], 1e-2, 1e4)
    assert got == pytest.approx(exact, rel=5e-3)


def test_representation_power_sum():
    k = PowerSum(3, ((1.0, -2.5), (1.0, -2.2)))
    exact = float(k.value(np.array([2.0, 0, 0])))
    got = representation_reconstruct(k, [2.0, 0, 0], 1e-2, 1e4)
    assert got == pytest.approx(exact, rel=2e-3)


def test_representation_errors():
    with pytest.raises(KernelError, match="essential convexity"):
        representation_reconstruct(Riesz(3, -0.5), [1, 0, 0], 0.1, 10)
    with pytest.raises(KernelError, match="need 0 < eps"):
        representation_reconstruct(Riesz(3, -2.0), [1, 0, 0], 2.0, 10)


@pytest.mark.parametrize("d,b,q", [(1, -0.5, 1.0), (1, -0.5, 2.0), (3, -2.0, 1.0), (3, -2.0, 0.5)])
def test_fourier_estimate_riesz(d, b, q):
    xi = np.zeros(d)
    xi[0] = q
    assert fourier_estimate(Riesz(d, b), xi) == pytest.approx(riesz_fourier(d, b, q), rel=1e-2)


def test_fourier_scaling_ratio_1d():
    k = Riesz(1, -0.5)
    ratio = fourier_estimate(k, [1.0]) / fourier_estimate(k, [2.0])
    assert ratio == pytest.approx(math.sqrt(2), rel=1e-2)


def test_fourier_zero_frequency():
    with pytest.raises(KernelError, match="zero frequency"):
        fourier_estimate(Riesz(1, -0.5), [0.0])
