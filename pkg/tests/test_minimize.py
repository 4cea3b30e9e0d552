import math

import numpy as np
from pydantic import ValidationError
import pytest

from contchoreo.action import mu_xi_inner
from contchoreo.continuum import compute_spectrum, el_residual
from contchoreo.core.loops import (
    FourierLoop,
    circle_loop,
    ellipse_loop,
    random_loop,
    xi,
)
from contchoreo.core.params import make_params, xi_hat
from contchoreo.exceptions import ChoreoDomainError, ChoreoQuadratureError
import contchoreo.minimize as minimize_module
from contchoreo.minimize import (
    MinimizeResult,
    OptimizeOptions,
    ScanRow,
    circle_distance,
    frame_singular_values,
    minimize_action,
    random_initial_loop,
    scan_sigma,
)


@pytest.fixture
def params():
    return make_params(0.5)


@pytest.fixture
def start():
    # a wobbly ellipse with higher harmonics, far from any collision
    noise = random_loop(3, rng=np.random.default_rng(2), decay=2.0, scale=0.05)
    return ellipse_loop((1.2, 0.8), modes=3) + noise


def fake_result(params, seed, converged=True):
    return MinimizeResult(
        loop=circle_loop(),
        value=params.predicted_minimum,
        gradient_norm=0.0,
        iterations=1,
        converged=converged,
        circle_distance=0.0,
        sigma=params.sigma,
        seed=seed,
    )


def test_minimize_action__reaches_circle(params, start):
    result = minimize_action(params, 2, 3, start, OptimizeOptions(grid=64))
    assert result.converged, f"stopped with |g|={result.gradient_norm:.2e}"
    assert result.gradient_norm < 1e-6
    assert result.value == pytest.approx(params.predicted_minimum, abs=1e-7)
    assert result.circle_distance < 1e-4
    np.testing.assert_allclose(frame_singular_values(result.loop), [1.0, 1.0], atol=1e-4)
    assert result.history[0] > result.history[-1]
    assert np.all(np.diff(result.history) <= 0.0), "Expecting monotone descent."


def test_minimize_action__plain_gradient_descends(params, start):
    opts = OptimizeOptions(grid=64, preconditioned=False, max_iterations=20)
    result = minimize_action(params, 2, 3, start, opts)
    assert result.iterations <= 20
    assert result.value < result.history[0]
    assert np.all(np.diff(result.history) <= 0.0)


def test_minimize_action__iteration_cap(params, start, mocker):
    warning = mocker.patch("contchoreo.minimize.logger.warning")
    result = minimize_action(params, 2, 3, start, OptimizeOptions(grid=64, max_iterations=3))
    assert result.converged is False
    assert result.iterations <= 3
    warning.assert_called()


def test_minimize_action__pads_init(params):
    result = minimize_action(
        params, 2, 4, circle_loop(radius=1.1), OptimizeOptions(grid=64, max_iterations=2)
    )
    assert result.loop.modes == 4


def test_minimize_action__collision_retries(params):
    opts = OptimizeOptions(grid=64, max_retries=1)
    result = minimize_action(params, 2, 2, FourierLoop(np.zeros((2, 2))), opts)
    assert result.converged is False
    assert result.retries == 1
    assert math.isinf(result.value)
    assert math.isinf(result.circle_distance)


def test_minimize_action__dimension_mismatch(params):
    with pytest.raises(ChoreoDomainError):
        minimize_action(params, 3, 2, circle_loop())


def test_minimize_action__seeded(params, mocker):
    descend = mocker.spy(minimize_module, "_descend")
    result = minimize_action(params, 2, 2, 7, OptimizeOptions(grid=64, max_iterations=1))
    assert result.seed == 7
    np.testing.assert_array_equal(
        descend.call_args[0][0].coeffs, random_initial_loop(params, 2, 2, 7).coeffs
    )


def test_random_initial_loop__normalised(params):
    loop = random_initial_loop(params, 3, 5, seed=4)
    spectrum = compute_spectrum(params, 5)
    assert mu_xi_inner(loop, spectrum) == pytest.approx(1.0, abs=1e-10)
    assert loop.dim == 3 and loop.modes == 5


def test_random_initial_loop__deterministic(params):
    a = random_initial_loop(params, 2, 4, seed=11)
    b = random_initial_loop(params, 2, 4, seed=11)
    c = random_initial_loop(params, 2, 4, seed=12)
    np.testing.assert_array_equal(a.coeffs, b.coeffs)
    assert not np.allclose(a.coeffs, c.coeffs)


def test_random_initial_loop__no_modes(params):
    with pytest.raises(ChoreoDomainError):
        random_initial_loop(params, 2, 0)


def test_circle_distance__invariances():
    rotation = np.linalg.qr(np.random.default_rng(0).standard_normal((3, 3)))[0]
    loop = circle_loop(dim=3, modes=3).shifted(0.3).rotated(rotation)
    assert circle_distance(loop) == pytest.approx(0.0, abs=1e-12)


def test_circle_distance__not_circles():
    assert circle_distance(circle_loop(radius=2.0)) > 0.1
    assert circle_distance(ellipse_loop((1.0, 0.5))) > 0.1
    assert math.isinf(circle_distance(FourierLoop(np.array([[0.0, 0.0], [0.5, -0.5j]]))))


def test_optimize_options__validation():
    with pytest.raises(ValidationError):
        OptimizeOptions(shrink=1.0)
    with pytest.raises(ValidationError):
        OptimizeOptions(grid=0)
    with pytest.raises(ValidationError):
        OptimizeOptions(gradient_tolerance=0.0)
    with pytest.raises(ValidationError):
        OptimizeOptions(step=1.0)


def test_scan_sigma__rows_sorted(mocker):
    def fake(params, dim, K, seed, opts, quad):
        if seed == 1:
            raise ChoreoQuadratureError("did not settle")
        return fake_result(params, seed)

    mocker.patch("contchoreo.minimize.minimize_action", side_effect=fake)
    error = mocker.patch("contchoreo.minimize.logger.error")
    rows = scan_sigma([0.75, 0.25], 2, 3, [2, 1, 0], threads=3)

    assert [(row.sigma, row.seed) for row in rows] == [
        (0.25, 0),
        (0.25, 1),
        (0.25, 2),
        (0.75, 0),
        (0.75, 1),
        (0.75, 2),
    ]
    failed = [row for row in rows if row.error]
    assert [row.seed for row in failed] == [1, 1]
    assert failed[0].error.startswith("ChoreoQuadratureError")
    assert math.isnan(failed[0].achieved_min)
    assert error.call_count == 2
    assert all(row.gap == pytest.approx(0.0) for row in rows if not row.error)


def test_scan_sigma__no_seeds():
    assert scan_sigma([0.5], 2, 3, []) == []


def test_scan_sigma__bad_sigma():
    with pytest.raises(ChoreoDomainError):
        scan_sigma([0.5, 1.2], 2, 3, [0])


def test_scan_row__from_result(params):
    row = ScanRow.from_result(params, fake_result(params, None))
    assert row.seed == -1
    assert row.v2 == params.v2
    assert row.result is not None


def test_minimize_action__truncates_init(params, mocker):
    descend = mocker.spy(minimize_module, "_descend")
    init = ellipse_loop((1.2, 0.8), modes=5)
    opts = OptimizeOptions(grid=64, max_iterations=2)
    result = minimize_action(params, 2, 3, init, opts)
    assert descend.call_args_list[0][0][0].modes == 3
    assert result.loop.modes == 3


def test_minimize_action__truncated_init_retries(params):
    opts = OptimizeOptions(grid=64, max_retries=1)
    result = minimize_action(params, 2, 2, FourierLoop(np.zeros((5, 2))), opts)
    assert result.retries == 1
    assert result.loop.modes == 2


def test_minimize_action__circle_is_fixed_point(params):
    result = minimize_action(params, 2, 3, circle_loop(), OptimizeOptions(grid=64))
    assert result.converged
    assert result.iterations <= 2
    assert result.value == pytest.approx(params.predicted_minimum, abs=1e-7)


def test_minimize_action__ellipse_becomes_circle(params):
    opts = OptimizeOptions(grid=64, max_iterations=2000)
    result = minimize_action(params, 2, 3, ellipse_loop((1.5, 0.7), modes=3), opts)
    assert result.converged, f"stopped with |g|={result.gradient_norm:.2e}"
    t = np.linspace(0.0, 1.0, 33)
    np.testing.assert_allclose(xi(result.loop, t), xi_hat(t), atol=1e-3)


def test_minimize_action__shift_and_rotation(params, start):
    angle = 0.7
    cos, sin = math.cos(angle), math.sin(angle)
    rotation = np.array([[cos, -sin], [sin, cos]])
    opts = OptimizeOptions(grid=64)
    plain = minimize_action(params, 2, 3, start, opts)
    moved = minimize_action(params, 2, 3, start.shifted(0.3).rotated(rotation), opts)
    assert plain.converged and moved.converged
    assert moved.value == pytest.approx(plain.value, abs=1e-8)


def test_minimize_action__never_below_lower_bound(params, start):
    result = minimize_action(params, 2, 3, start, OptimizeOptions(grid=64))
    assert min(result.history) >= params.predicted_minimum - 1e-6


@pytest.mark.slow
def test_multistart__planar_seeds_find_the_circle(params):
    rows = scan_sigma([0.5], 2, 8, range(20), OptimizeOptions(max_iterations=2000))
    for row in rows:
        assert row.converged, f"seed {row.seed}: {row.error}"
        assert abs(row.gap) / row.predicted_min < 1e-5, f"seed {row.seed}: gap {row.gap}"
        assert row.circle_distance < 1e-3
        assert el_residual(row.result.loop, params) < 1e-4


@pytest.mark.slow
def test_multistart__spatial_seeds_are_planar(params):
    rows = scan_sigma([0.5], 3, 8, range(5), OptimizeOptions(max_iterations=2000))
    for row in rows:
        assert row.converged, f"seed {row.seed}: {row.error}"
        np.testing.assert_allclose(
            frame_singular_values(row.result.loop), [1.0, 1.0], atol=1e-3
        )


@pytest.mark.slow
@pytest.mark.parametrize("sigma", [0.25, 0.5, 0.75])
def test_scan_sigma__end_to_end(sigma):
    opts = OptimizeOptions(grid=64, max_iterations=2000)
    rows = scan_sigma([sigma], 2, 3, [0, 1], opts)
    assert [row.seed for row in rows] == [0, 1]
    for row in rows:
        assert row.error is None
        assert row.converged, f"seed {row.seed} did not converge"
        assert abs(row.gap) < 1e-6
        assert row.circle_distance < 1e-3
