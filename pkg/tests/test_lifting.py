import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from platepml.lifting import (CASES, LiftEvaluator, boundary_residuals,
                              empirical_stability_constant, lambda_n, lift_dirichlet,
                              lift_neumann, neumann_coefficients, neumann_mode,
                              neumann_system, stability_ratio)
from platepml.spectral import IncidentWave, TraceCoefficients, make_mode_basis


@pytest.fixture(scope="module")
def basis():
    return make_mode_basis(IncidentWave(math.pi, math.pi / 3), 1.0, 10)


def random_phi(basis, seed, decay=2.0):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)
    return TraceCoefficients(1, v * (1.0 + basis.n.astype(float) ** 2) ** (-decay / 2))


def test_lambda_closed_form():
    e = math.e
    assert lambda_n(1.0, 1.0) == pytest.approx(6 * e ** 2 - e ** 4 - 1, abs=1e-10)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(1e-3, 30.0), sign=st.sampled_from([-1.0, 1.0]))
def test_lambda_strictly_negative(t, sign):
    assert lambda_n(sign * t, 1.0) < 0


@pytest.mark.parametrize("case", CASES)
@pytest.mark.parametrize("height", [0.5, 1.0, 2.0])
def test_boundary_identities(basis, case, height):
    for seed in range(3):
        ev = LiftEvaluator(case, height, basis, random_phi(basis, seed))
        res = boundary_residuals(ev, samples=1000)
        scale = max(1.0, float(np.abs(ev.phi.values).sum()))
        for key, value in res.items():
            assert value <= 1e-12 * scale, (case, key, value)


@pytest.mark.parametrize("alpha", [-4.7, -1.3, 0.5, 2.7208, 6.0])
def test_coefficient_system_residual(alpha):
    h = 1.0
    c = np.array(neumann_coefficients(alpha, h, 1.0))
    rhs = np.array([0.0, 0.0, 0.0, 1.0])
    system = neumann_system(alpha, h)
    assert np.linalg.norm(system @ c - rhs) <= 1e-10 * max(1.0, np.abs(system).max() * np.abs(c).max())


@pytest.mark.parametrize("alpha", [-4.7, -1.3, 0.5, 2.7208, 6.0, 25.0])
def test_stable_mode_matches_closed_form(alpha):
    h = 1.0
    x = np.linspace(0, h, 41)
    if abs(alpha * h) < 10:
        c1, c2, c3, c4 = neumann_coefficients(alpha, h)
        direct = (c1 + c2 * x) * np.exp(alpha * x) + (c3 + c4 * x) * np.exp(-alpha * x)
        assert np.allclose(neumann_mode(alpha, h, x), direct, rtol=1e-9, atol=1e-12)
    assert np.all(np.isfinite(neumann_mode(alpha, h, x)))
    assert neumann_mode(alpha, h, h, deriv=1) == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("alpha", [-3.56, -0.9, 1.7, 2.72])
@mp.workdps(40)
def test_mode_ode_residual(alpha):
    h = 1.0
    a = mp.mpf(alpha)

    def u(x):
        return neumann_mode(a, mp.mpf(h), x, 0, exp=mp.exp)

    for x in (0.13, 0.5, 0.87):
        x = mp.mpf(x)
        d2 = mp.diff(u, x, 2)
        d4 = mp.diff(u, x, 4)
        residual = d4 - 2 * a ** 2 * d2 + a ** 4 * u(x)
        scale = abs(d4) + abs(2 * a ** 2 * d2) + abs(a ** 4 * u(x))
        assert abs(residual) <= 1e-8 * scale


def test_zero_wavenumber_branch():
    assert neumann_mode(0.0, 1.0, 0.5) == pytest.approx(-0.125, abs=1e-15)
    assert neumann_mode(0.0, 1.0, 1.0, deriv=1) == pytest.approx(1.0)


@pytest.mark.parametrize("case", CASES)
def test_stability_constant_settles(case):
    wave = IncidentWave(math.pi, math.pi / 3)
    c30 = empirical_stability_constant(case, 1.0, make_mode_basis(wave, 1.0, 30), draws=40)
    c60 = empirical_stability_constant(case, 1.0, make_mode_basis(wave, 1.0, 60), draws=40)
    assert abs(c60 - c30) <= 0.1 * c30


def test_stability_ratio_and_helpers(basis):
    phi = random_phi(basis, 4)
    ev = lift_dirichlet(phi, 1.0, basis)
    assert ev.case == "dirichlet-top"
    assert stability_ratio(ev) > 0
    assert lift_neumann(phi, 1.0, basis).default_order == 0.5
    with pytest.raises(ValueError):
        stability_ratio(LiftEvaluator("neumann-top", 1.0, basis, TraceCoefficients.zeros(basis)))
    with pytest.raises(ValueError):
        LiftEvaluator("sideways", 1.0, basis, phi)
    with pytest.raises(ValueError):
        lift_dirichlet(phi, 1.0, basis, side="left")


def test_hessian_matches_finite_differences(basis):
    ev = LiftEvaluator("dirichlet-top", 1.0, basis, random_phi(basis, 9, decay=3.0))
    x1, x2, step = 0.37, 0.61, 1e-4
    u11, u12, u22 = ev.hessian(x1, x2)
    fd22 = (ev(x1, x2 + step) - 2 * ev(x1, x2) + ev(x1, x2 - step)) / step ** 2
    fd11 = (ev(x1 + step, x2) - 2 * ev(x1, x2) + ev(x1 - step, x2)) / step ** 2
    assert abs(u22 - fd22) <= 1e-5 * max(1.0, abs(u22))
    assert abs(u11 - fd11) <= 1e-5 * max(1.0, abs(u11))
