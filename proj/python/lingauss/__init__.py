"""Parameter estimation for linear-Gaussian state-space models."""

from ._lingauss import (
    ModelSpec,
    NumericalError,
    QPError,
    augment_with_disturbance,
    benchmark,
    check_derivatives,
    estimate,
    filter,
    landscape,
    named_model,
    objective,
    random_walk,
    simulate,
    stacked_log_likelihood,
    to_inner,
    underdetermined,
)

__version__ = "0.1.0"
