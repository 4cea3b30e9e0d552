import itertools
import math

import numpy as np
from pydantic import ValidationError
import pytest

from contchoreo.core import params
from contchoreo.core.quadrature import (
    QuadratureScheme,
    QuadratureSpec,
    interval_rule,
    one_sided_rule,
    quadrature_rule,
    reduce_sum,
    singular_integral,
)
from contchoreo.exceptions import ChoreoNonIntegrableError

GJ = QuadratureSpec(scheme=QuadratureScheme.GAUSS_JACOBI, nodes=64, reproducible=False)


def c_closed_form(sigma: float) -> float:
    return (
        2.0**-sigma
        * math.gamma((1.0 - sigma) / 2.0)
        / (math.sqrt(math.pi) * math.gamma(1.0 - sigma / 2.0))
    )


def test_singular_integral__one_sided():
    # ∫₀¹ s^{-1/2} ds = 2; the right end is regular.
    value = singular_integral(lambda s: s**-0.5, (0.5, 0.0), GJ)
    assert value == pytest.approx(2.0, rel=1e-12)


def test_singular_integral__both_ends():
    # ∫₀¹ (s(1 − s))^{-1/2} ds = π
    value = singular_integral(lambda s: (s * (1.0 - s)) ** -0.5, 0.5, GJ)
    assert value == pytest.approx(math.pi, rel=1e-12)


@pytest.mark.parametrize("sigma", [0.1, 0.25, 0.5, 0.75, 0.9])
def test_singular_integral__chord_constant(sigma):
    # closed form of ∫₀¹ (2 sin πt)^{-σ} dt
    value = singular_integral(lambda t: (2.0 * np.sin(np.pi * t)) ** -sigma, sigma, GJ)
    assert value == pytest.approx(c_closed_form(sigma), rel=1e-10)


@pytest.mark.parametrize("alpha", [1.0, 1.5, -0.1, float("nan"), (0.5, 1.0)])
def test_singular_integral__not_integrable(alpha):
    with pytest.raises(ChoreoNonIntegrableError):
        singular_integral(lambda t: t, alpha, GJ)


def test_singular_integral__understated_singularity():
    # t^{-0.9} integrated as if it were regular does not settle under refinement
    with pytest.raises(ChoreoNonIntegrableError):
        singular_integral(lambda t: t**-0.9, 0.0, GJ)


def test_singular_integral__vector_valued():
    value = singular_integral(
        lambda t: np.stack([t**-0.5, 3.0 * t**-0.5], -1),
        (0.5, 0.0),
        GJ,
    )
    assert value.shape == (2,)
    assert value[0] == pytest.approx(2.0, rel=1e-12)
    assert value[1] == pytest.approx(6.0, rel=1e-12)


def test_graded_midpoint__second_order():
    # doubling the nodes divides the error by four
    exact = c_closed_form(0.5)
    errors = []
    for nodes in (64, 128, 256):
        quad = QuadratureSpec(scheme=QuadratureScheme.GRADED_MIDPOINT, nodes=nodes)
        errors.append(abs(params.compute_c(0.5, quad) - exact))
    for coarse, fine in zip(errors, errors[1:]):
        assert 3.5 < coarse / fine < 4.5, f"unexpected refinement ratio {coarse / fine}"


def test_interval_rule__unit_weight():
    # α = 0 is Gauss–Legendre on each half
    nodes, weights = interval_rule(GJ, 0.0)
    assert nodes.min() > 0.0 and nodes.max() < 1.0
    assert weights.sum() == pytest.approx(1.0, rel=1e-14)


def test_interval_rule__subinterval():
    # ∫₂⁵ (t − 2)^{-1/2} (5 − t)^{-1/2} dt = π
    nodes, weights = interval_rule(GJ, 0.5, 2.0, 5.0)
    value = (weights * ((nodes - 2.0) * (5.0 - nodes)) ** -0.5).sum()
    assert value == pytest.approx(math.pi, rel=1e-12)


@pytest.mark.parametrize("a,b", [(0.0, 0.1), (0.1, 0.0)])
def test_one_sided_rule(a, b):
    # ∫ |t − a|^{-1/2} over the interval = 2√0.1, whichever side a is on
    nodes, weights = one_sided_rule(GJ, 0.5, a, b)
    assert (weights > 0).all()
    value = (weights * abs(nodes - a) ** -0.5).sum()
    assert value == pytest.approx(2.0 * math.sqrt(0.1), rel=1e-12)


def test_reduce_sum__order_independent():
    terms = [1e16, 1.0, -1e16, 3.0]
    results = {
        reduce_sum(list(order), reproducible=True)
        for order in itertools.permutations(terms)
    }
    assert results == {4.0}, "Expecting fsum to be independent of ordering."


def test_reduce_sum__complex():
    assert reduce_sum([1e16 + 1j, 1.0 - 1e16j, -1e16, 1e16j], reproducible=True) == 1 + 1j


def test_quadrature_spec__too_coarse():
    with pytest.raises(ValidationError):
        QuadratureSpec(nodes=4)


def test_quadrature_spec__bad_grading():
    with pytest.raises(ValidationError):
        QuadratureSpec(grading=0.5)


def test_quadrature_spec__coarsened():
    quad = QuadratureSpec(nodes=16)
    assert quad.coarsened().nodes == 8
    assert quad.coarsened().coarsened().nodes == 8


def test_quadrature_spec__consistency_tolerance():
    assert GJ.consistency_tolerance == 1e-6
    graded = QuadratureSpec(scheme=QuadratureScheme.GRADED_MIDPOINT)
    assert graded.consistency_tolerance == graded.divergence_tolerance


@pytest.mark.parametrize("sigma", [0.25, 0.5, 0.75])
def test_graded_midpoint__doubling_factor(sigma):
    exact = c_closed_form(sigma)
    errors = []
    for nodes in (64, 128, 256):
        quad = QuadratureSpec(scheme=QuadratureScheme.GRADED_MIDPOINT, nodes=nodes)
        errors.append(abs(params.compute_c(sigma, quad) - exact))
    factor = QuadratureSpec(scheme=QuadratureScheme.GRADED_MIDPOINT).doubling_factor
    assert factor == 4.0
    for coarse, fine in zip(errors, errors[1:]):
        assert coarse / fine == pytest.approx(factor, rel=0.15)


@pytest.mark.parametrize("sigma", [0.25, 0.5, 0.75])
def test_gauss_jacobi__geometric(sigma):
    # the chord factor is analytic well beyond each half interval
    exact = c_closed_form(sigma)
    coarse = params.compute_c(sigma, QuadratureSpec(scheme="gauss-jacobi", nodes=8))
    fine = params.compute_c(sigma, QuadratureSpec(scheme="gauss-jacobi", nodes=16))
    assert abs(coarse - exact) < 1e-9 * exact
    assert abs(fine - exact) < 1e-12 * exact
    assert math.isinf(GJ.doubling_factor)


def test_quadrature_spec__error_estimate():
    graded = QuadratureSpec(scheme=QuadratureScheme.GRADED_MIDPOINT)
    # Richardson: a second order rule keeps a third of the change as error
    assert graded.error_estimate(3e-4) == pytest.approx(1e-4)
    assert GJ.error_estimate(3e-4) == 3e-4


def test_quadrature_rule__both_ends():
    nodes, weights = quadrature_rule(GJ, 0.5)
    np.testing.assert_array_equal(nodes, interval_rule(GJ, 0.5)[0])
    value = (weights * (nodes * (1.0 - nodes)) ** -0.5).sum()
    assert value == pytest.approx(math.pi, rel=1e-12)
