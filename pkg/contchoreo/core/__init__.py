"""Model constants, loop representations and the singular quadrature engine."""
from .loops import (
    FourierLoop,
    SampledLoop,
    acceleration,
    chord_remainder,
    circle_loop,
    derivative,
    ellipse_loop,
    evaluate,
    fit_fourier,
    kinetic_integral,
    l2_norm_squared,
    poincare_ratio,
    positions,
    random_loop,
    sample_loop,
    xi,
    xi_quadrature,
)
from .params import (
    LAMBDA_1,
    ModelParams,
    check_sigma,
    compute_c,
    make_params,
    mu_weight,
    xi_hat,
)
from .quadrature import (
    QuadratureScheme,
    QuadratureSpec,
    interval_rule,
    one_sided_rule,
    quadrature_rule,
    reduce_sum,
    singular_integral,
)

__all__ = [
    "FourierLoop",
    "LAMBDA_1",
    "ModelParams",
    "QuadratureScheme",
    "QuadratureSpec",
    "SampledLoop",
    "acceleration",
    "check_sigma",
    "chord_remainder",
    "circle_loop",
    "compute_c",
    "derivative",
    "ellipse_loop",
    "evaluate",
    "fit_fourier",
    "interval_rule",
    "kinetic_integral",
    "l2_norm_squared",
    "make_params",
    "mu_weight",
    "one_sided_rule",
    "poincare_ratio",
    "positions",
    "quadrature_rule",
    "random_loop",
    "reduce_sum",
    "sample_loop",
    "singular_integral",
    "xi",
    "xi_hat",
    "xi_quadrature",
]
