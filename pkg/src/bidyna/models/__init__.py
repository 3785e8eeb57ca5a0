"""Learned world models: next-state, predecessor, multi-step, and parametric."""

from .conditioned import action_conditioned_backward
from .expectation import ExpectationModelBundle, expected_linear_backward_step
from .expfamily import (
    ExpFamilyModelParams,
    candidate_distribution,
    mle_gradient,
    mle_nll,
    planml_gradient,
    planml_loss,
)
from .mle import BackwardModel, ForwardModel
from .multistep import LambdaModel, geometric_mixture, n_step_backward

__all__ = [
    "BackwardModel",
    "ExpFamilyModelParams",
    "ExpectationModelBundle",
    "ForwardModel",
    "LambdaModel",
    "action_conditioned_backward",
    "candidate_distribution",
    "expected_linear_backward_step",
    "geometric_mixture",
    "mle_gradient",
    "mle_nll",
    "n_step_backward",
    "planml_gradient",
    "planml_loss",
]
