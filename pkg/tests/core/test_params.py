import math

import numpy as np
from pydantic import ValidationError
import pytest

from contchoreo.core.params import (
    LAMBDA_1,
    ModelParams,
    check_sigma,
    compute_c,
    make_params,
    mu_weight,
    xi_hat,
)
from contchoreo.exceptions import ChoreoDomainError, ChoreoSingularityError


def c_closed_form(sigma: float) -> float:
    return (
        2.0**-sigma
        * math.gamma((1.0 - sigma) / 2.0)
        / (math.sqrt(math.pi) * math.gamma(1.0 - sigma / 2.0))
    )


@pytest.mark.parametrize("sigma", [0.05, 0.25, 0.5, 0.75, 0.95])
def test_compute_c(sigma):
    assert compute_c(sigma) == pytest.approx(c_closed_form(sigma), rel=1e-10)


def test_make_params__half():
    # c(1/2) = 1.180340, v² = σc/(8π²), minimum 2π²v²(1 + 2/σ)
    p = make_params(0.5)
    assert p.c == pytest.approx(1.180340, abs=1e-6)
    assert p.v2 == pytest.approx(0.0074746, abs=1e-7)
    assert p.predicted_minimum == pytest.approx(0.7377125, abs=1e-6)
    assert p.angular_frequency**2 == pytest.approx(LAMBDA_1 * p.v2)


@pytest.mark.parametrize("sigma", [0.0, 1.0, -0.5, 1.5, float("nan"), "half", None])
def test_check_sigma__out_of_domain(sigma):
    with pytest.raises(ChoreoDomainError):
        check_sigma(sigma)


def test_make_params__out_of_domain():
    with pytest.raises(ChoreoDomainError):
        make_params(1.0)


def test_model_params__inconsistent():
    p = make_params(0.5)
    with pytest.raises(ValidationError):
        ModelParams(sigma=p.sigma, c=p.c, v2=2.0 * p.v2)


def test_model_params__frozen():
    p = make_params(0.5)
    with pytest.raises(TypeError):
        p.sigma = 0.25


def test_model_params__json():
    p = make_params(0.25)
    assert ModelParams.from_json(p.to_json()) == p


def test_model_params__json_bad_sigma():
    with pytest.raises(ChoreoDomainError):
        ModelParams.from_json('{"sigma": 2.0, "c": 1.0, "v2": 0.0}')


def test_mu_weight():
    p = make_params(0.5)
    assert mu_weight(0.5, p) == pytest.approx(2.0**-2.5 / p.c)
    assert mu_weight(0.25, p) == pytest.approx(mu_weight(0.75, p))


@pytest.mark.parametrize("s", [0.0, 1.0, -0.25])
def test_mu_weight__pole(s):
    with pytest.raises(ChoreoSingularityError):
        mu_weight(s, make_params(0.5))


def test_xi_hat():
    assert xi_hat(0.5) == pytest.approx(4.0)
    assert xi_hat(0.0) == 0.0


@pytest.mark.parametrize("sigma", [0.25, 0.5, 0.75])
def test_mu_weight__circle_identity(sigma):
    # μ ξ̂^{σ/2+1} c = 1 away from the poles
    p = make_params(sigma)
    s = np.linspace(0.01, 0.99, 41)
    product = mu_weight(s, p) * xi_hat(s) ** (sigma / 2.0 + 1.0) * p.c
    np.testing.assert_allclose(product, 1.0, rtol=1e-12)


def test_compute_c__monotone():
    sigmas = np.round(np.arange(0.1, 0.95, 0.1), 10)
    values = np.array([compute_c(sigma) for sigma in sigmas])
    assert np.all(np.diff(values) > 0.0), "Expecting c to grow with sigma."
    for sigma, value in zip(sigmas, values):
        assert value == pytest.approx(c_closed_form(sigma), rel=1e-10)
