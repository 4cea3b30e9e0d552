import math

import numpy as np
import pytest

from contchoreo.action import (
    ActionBreakdown,
    action,
    action_gradient,
    action_value,
    circle_action,
    g_scalar,
    holder_bound,
    holder_phi,
    jensen_gap,
    kinetic_gap,
    kinetic_part,
    mu_xi_inner,
    potential_integral,
)
from contchoreo.continuum import compute_spectrum, el_residual, pure_mode, pv_force
from contchoreo.core.loops import (
    FourierLoop,
    acceleration,
    circle_loop,
    random_loop,
    xi,
)
from contchoreo.core.params import make_params, xi_hat
from contchoreo.core.quadrature import QuadratureSpec
from contchoreo.exceptions import (
    ChoreoConfigurationException,
    ChoreoConsistencyError,
    ChoreoDomainError,
    ChoreoInfiniteActionError,
    ChoreoNonIntegrableError,
)

SIGMAS = [0.25, 0.5, 0.75]


@pytest.fixture
def params():
    return make_params(0.5)


@pytest.fixture
def loop():
    # unit circle plus small higher harmonics in R^3
    noise = random_loop(4, dim=3, rng=np.random.default_rng(21), decay=2.0, scale=0.1)
    return circle_loop(dim=3, modes=4) + noise


def test_action__unit_circle(params):
    # kinetic σc/4, potential c/2, every bound tight
    breakdown = action(circle_loop(), params)
    assert breakdown.kinetic == pytest.approx(0.147543, abs=1e-6)
    assert breakdown.potential == pytest.approx(0.590170, abs=1e-6)
    assert breakdown.total == pytest.approx(0.7377125, abs=1e-6)
    assert breakdown.mu_xi == pytest.approx(1.0, abs=1e-12)
    for value in (breakdown.tilde, breakdown.bar, breakdown.lower_bound):
        assert value == pytest.approx(breakdown.total, abs=1e-10)


@pytest.mark.parametrize("sigma", SIGMAS)
def test_action__circle_is_predicted_minimum(sigma):
    params = make_params(sigma)
    assert action(circle_loop(), params).total == pytest.approx(
        params.predicted_minimum, rel=1e-10
    )
    assert circle_action(1.0, params) == pytest.approx(params.predicted_minimum, rel=1e-12)


@pytest.mark.parametrize("radius", [0.5, 0.9, 1.1, 2.0])
def test_circle_action__radius(params, radius):
    # R = 1 minimises 2π²v²R² + (c/2)R^{-σ}
    assert circle_action(radius, params) > circle_action(1.0, params)
    loop = circle_loop(radius=radius)
    assert action_value(loop, params) == pytest.approx(circle_action(radius, params))


def test_circle_action__bad_radius(params):
    with pytest.raises(ChoreoDomainError):
        circle_action(0.0, params)


@pytest.mark.parametrize("seed", range(5))
def test_action__chain(params, seed):
    loop = random_loop(5, dim=3, rng=np.random.default_rng(seed), decay=2.0)
    breakdown = action(loop, params)
    assert breakdown.chain_holds()
    assert breakdown.total > breakdown.lower_bound


def test_action__chain_on_unnormalised_loops(params):
    rng = np.random.default_rng(99)
    strict = 0
    for index in range(100):
        coeffs = rng.uniform(-1, 1, (3, 3)) + 1j * rng.uniform(-1, 1, (3, 3))
        breakdown = action(FourierLoop(coeffs), params)
        assert breakdown.chain_holds(), f"loop {index}: {breakdown}"
        assert breakdown.total > breakdown.lower_bound
        assert breakdown.bar >= breakdown.lower_bound
        strict += breakdown.bar > breakdown.lower_bound + 1e-9
    # ∫μξ is almost never exactly one, so the last bound is rarely tight
    assert strict > 90


def test_action__chain_violation_warns(params, mocker):
    warning = mocker.patch("contchoreo.action.logger.warning")
    mocker.patch.object(ActionBreakdown, "chain_holds", return_value=False)
    action(circle_loop(), params)
    warning.assert_called_once()


def test_action_breakdown__json(params):
    raw = action(circle_loop(), params).to_json()
    assert raw.index('"K"') < raw.index('"M"') < raw.index('"bar"')
    assert ActionBreakdown.parse_raw(raw).K == 1


def test_g_scalar():
    assert g_scalar(1.0, 0.5) == pytest.approx(5.0)
    assert g_scalar(0.5, 0.5) > 5.0 and g_scalar(2.0, 0.5) > 5.0
    with pytest.raises(ChoreoDomainError):
        g_scalar(0.0, 0.5)


def test_potential_integral__zero_loop(params):
    with pytest.raises(ChoreoInfiniteActionError) as exc:
        potential_integral(FourierLoop(np.zeros((1, 2))), params)
    assert exc.value.pair is not None


def test_potential_integral__grid_too_small(params):
    with pytest.raises(ChoreoDomainError):
        potential_integral(random_loop(8), params, M=10)


def test_potential_integral__grid_converged(params, loop):
    coarse = potential_integral(loop, params, M=128)
    fine = potential_integral(loop, params, M=512)
    assert coarse == pytest.approx(fine, rel=1e-8)


def test_kinetic_part(params):
    assert kinetic_part(circle_loop(), params) == pytest.approx(params.sigma * params.c / 4)


def test_mu_xi_inner__matches_quadrature(params, loop):
    spectrum = compute_spectrum(params, loop.modes)
    assert mu_xi_inner(loop, spectrum) == pytest.approx(
        mu_xi_inner(loop, spectrum, check=False)
    )


def test_mu_xi_inner__inconsistent(params, loop, mocker):
    spectrum = compute_spectrum(params, loop.modes)
    mocker.patch("contchoreo.action.xi", side_effect=lambda y, t: 2.0 * xi(y, t))
    with pytest.raises(ChoreoConsistencyError):
        mu_xi_inner(loop, spectrum)


def test_kinetic_gap(params):
    spectrum = compute_spectrum(params, 3)
    assert kinetic_gap(circle_loop(modes=3), spectrum) == pytest.approx(0.0, abs=1e-9)
    # 2‖a₂‖²(2π)²(4 − d₂) with ‖a₂‖² = 1/2
    assert kinetic_gap(pure_mode(2), spectrum) == pytest.approx(
        4.0 * math.pi**2 * (4.0 - 8.0 / 3.0), rel=1e-8
    )


def test_action_gradient__finite_difference(params, loop):
    quad = QuadratureSpec(nodes=32)
    M = 64
    gradient = action_gradient(loop, params, M, quad)
    h = 1e-6
    for k, d in [(0, 0), (1, 2), (3, 1)]:
        for unit in (1.0, 1j):
            bump = np.zeros_like(loop.coeffs)
            bump[k, d] = unit * h
            plus = action_value(FourierLoop(loop.coeffs + bump), params, M, quad)
            minus = action_value(FourierLoop(loop.coeffs - bump), params, M, quad)
            expected = (plus - minus) / (2.0 * h)
            actual = gradient[k, d].real if unit == 1.0 else gradient[k, d].imag
            assert actual == pytest.approx(expected, abs=1e-6), f"mode {k + 1}, axis {d}"


def test_action_gradient__circle_vanishes(params):
    gradient = action_gradient(circle_loop(modes=3), params)
    assert np.max(np.abs(gradient)) < 1e-9


def test_action_gradient__euler_lagrange(params, loop):
    # g_k = 2 × (Fourier coefficient k of −v²ÿ + F)
    M = 256
    s = np.arange(M) / M
    residual = -params.v2 * acceleration(loop, s) + pv_force(loop, s, params)
    coefficients = np.fft.fft(residual, axis=0)[1 : loop.modes + 1] / M
    gradient = action_gradient(loop, params, M)
    np.testing.assert_allclose(gradient, 2.0 * coefficients, atol=1e-6)


def test_action_gradient__kinetic_only(params, loop):
    kinetic = action_gradient(loop, params, include_potential=False)
    k = loop.wavenumbers
    expected = 2.0 * params.v2 * ((2.0 * math.pi * k) ** 2)[:, None] * loop.coeffs
    np.testing.assert_allclose(kinetic, expected)


def test_el_residual__circle_is_critical(params):
    assert el_residual(circle_loop(), params) < 1e-6


@pytest.mark.parametrize("sigma", SIGMAS)
def test_holder__circle_profile(sigma):
    # Φ(4 sin²πt) = c = (∫μ^{β/(β+1)})^{β+1}
    params = make_params(sigma)
    assert holder_phi(xi_hat, params) == pytest.approx(params.c, rel=1e-10)
    assert holder_bound(params) == pytest.approx(params.c, rel=1e-10)


def test_holder__other_profiles(params):
    # a second harmonic moves ξ away from the circle profile
    bumped = FourierLoop(np.array([[0.5, -0.5j], [0.15, -0.15j]]))
    profile = lambda t: xi(bumped, t)  # noqa: E731
    assert holder_phi(profile, params) > params.c
    scaled = lambda t: 3.0 * xi_hat(t)  # noqa: E731
    assert holder_phi(scaled, params) == pytest.approx(params.c, rel=1e-10)


def test_holder_phi__not_integrable(params):
    with pytest.raises(ChoreoNonIntegrableError):
        holder_phi(xi_hat, params, beta=0.5)
    with pytest.raises(ChoreoDomainError):
        holder_phi(lambda t: xi_hat(t) - 1.0, params)


def test_jensen_gap(params, loop):
    assert jensen_gap(circle_loop(), 0.3, params) == pytest.approx(0.0, abs=1e-12)
    for t in (0.1, 0.25, 0.5):
        assert jensen_gap(loop, t, params) >= 0.0


def test_jensen_gap__collision(params):
    with pytest.raises(ChoreoInfiniteActionError):
        jensen_gap(pure_mode(2), 0.5, params)
    with pytest.raises(ChoreoDomainError):
        jensen_gap(circle_loop(), 1.0, params)


def test_action__sigma_mismatch(params):
    spectrum = compute_spectrum(make_params(0.25), 1)
    with pytest.raises(ChoreoConfigurationException):
        action(circle_loop(), params, spectrum=spectrum)
