"""Softmax transition models and their likelihood and planner-aware gradients.

The model assigns each candidate state a probability proportional to
``exp(features(candidate, conditioning) . theta)``. Conditioning runs either
forward in time (candidates are successors of a source state) or backward
(candidates are predecessors of a destination). Two training signals are
provided:

* plain likelihood: push probability mass toward observed candidates;
* planner-aware: make the model's expected value-update vector match the
  update the observed transition would have produced, so model capacity is
  spent where planning feels it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ValidationError

Batch = Sequence[tuple[int, int, float, int]]  # (state, action, reward, next_state)


@dataclass
class ExpFamilyModelParams:
    """Softmax model parameters.

    Args:
        theta: (dim,) natural parameters.
        features: (n_candidates, n_conditioning, dim) feature of each
            (candidate, conditioning) pair.
        direction: "forward" (condition on source, predict successor) or
            "backward" (condition on destination, predict predecessor).
    """

    theta: np.ndarray
    features: np.ndarray
    direction: str

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.features = np.asarray(self.features, dtype=float)
        if self.direction not in ("forward", "backward"):
            raise ValidationError(f"direction must be 'forward' or 'backward', got {self.direction!r}")
        if self.features.ndim != 3 or self.features.shape[2] != self.theta.shape[0]:
            raise ValidationError(
                f"features shape {self.features.shape} does not match theta dim {self.theta.shape}"
            )


def candidate_distribution(params: ExpFamilyModelParams, conditioning: int) -> np.ndarray:
    """Softmax over candidates given the conditioning state."""
    logits = params.features[:, conditioning, :] @ params.theta
    logits = logits - logits.max()
    exp = np.exp(logits)
    return exp / exp.sum()


def _endpoints(params: ExpFamilyModelParams, transition) -> tuple[int, int]:
    """(conditioning, observed candidate) for one transition, per direction."""
    state, _, _, next_state = transition
    if params.direction == "backward":
        return next_state, state
    return state, next_state


def mle_nll(params: ExpFamilyModelParams, batch: Batch) -> float:
    """Mean negative log-likelihood of the observed candidates."""
    if len(batch) == 0:
        raise ValidationError("empty batch")
    total = 0.0
    for transition in batch:
        cond, observed = _endpoints(params, transition)
        total -= float(np.log(candidate_distribution(params, cond)[observed]))
    return total / len(batch)


def mle_gradient(params: ExpFamilyModelParams, batch: Batch) -> np.ndarray:
    """Gradient of :func:`mle_nll`: expected minus observed features, averaged."""
    if len(batch) == 0:
        raise ValidationError("empty batch")
    grad = np.zeros_like(params.theta)
    for transition in batch:
        cond, observed = _endpoints(params, transition)
        probs = candidate_distribution(params, cond)
        mean_feature = probs @ params.features[:, cond, :]
        grad += mean_feature - params.features[observed, cond, :]
    return grad / len(batch)


def _update_vectors(
    params: ExpFamilyModelParams,
    cond: int,
    values: np.ndarray,
    reward: np.ndarray,
    discount: float,
) -> np.ndarray:
    """Per-candidate tabular value-update vectors, (n_candidates, n_states).

    Backward: candidate u would be updated toward the destination's
    bootstrap, so the vector is the TD error times the indicator of u.
    Forward: the conditioning source s is updated toward each candidate
    successor's bootstrap, so every vector is supported on s.
    """
    n_cand = params.features.shape[0]
    candidates = np.arange(n_cand)
    if params.direction == "backward":
        td = reward[candidates, cond] + discount * values[cond] - values[candidates]
        vectors = np.zeros((n_cand, values.shape[0]))
        vectors[candidates, candidates] = td
    else:
        td = reward[cond, candidates] + discount * values[candidates] - values[cond]
        vectors = np.zeros((n_cand, values.shape[0]))
        vectors[:, cond] = td
    return vectors


def planml_loss(
    params: ExpFamilyModelParams,
    batch: Batch,
    values: np.ndarray,
    reward: np.ndarray,
    discount: float,
) -> float:
    """Mean squared mismatch between expected and observed value updates.

    For each transition, compares the model's expected update vector (over
    candidates) against the update the actually observed candidate would
    produce, both evaluated at the fixed ``values`` table with the given
    bilinear ``reward[u, t]`` edge-reward lookup (forward-time indexing).
    """
    if len(batch) == 0:
        raise ValidationError("empty batch")
    values = np.asarray(values, dtype=float)
    total = 0.0
    for transition in batch:
        cond, observed = _endpoints(params, transition)
        probs = candidate_distribution(params, cond)
        vectors = _update_vectors(params, cond, values, reward, discount)
        gap = probs @ vectors - vectors[observed]
        total += float(gap @ gap)
    return total / len(batch)


def planml_gradient(
    params: ExpFamilyModelParams,
    batch: Batch,
    values: np.ndarray,
    reward: np.ndarray,
    discount: float,
) -> np.ndarray:
    """Exact gradient of :func:`planml_loss` in theta.

    Differentiating the squared gap routes through the softmax scores only:
    each candidate contributes its update vector's alignment with the gap,
    weighted by probability and centered features.
    """
    if len(batch) == 0:
        raise ValidationError("empty batch")
    values = np.asarray(values, dtype=float)
    grad = np.zeros_like(params.theta)
    for transition in batch:
        cond, observed = _endpoints(params, transition)
        probs = candidate_distribution(params, cond)
        feats = params.features[:, cond, :]
        mean_feature = probs @ feats
        vectors = _update_vectors(params, cond, values, reward, discount)
        gap = probs @ vectors - vectors[observed]
        alignment = vectors @ gap
        grad += 2.0 * ((probs * alignment) @ (feats - mean_feature[None, :]))
    return grad / len(batch)
