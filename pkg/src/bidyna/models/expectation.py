"""Expectation models over predecessor features, for linear value functions.

A linear value planner does not need the whole predecessor distribution, only
its first and second feature moments and a bilinear reward head. This module
packages those moments for the tabular case and applies the resulting
expected update, which reproduces every sampled predecessor update in
expectation, and exactly equals the distributional tabular update when
features are one-hot.
"""

from __future__ import annotations

import numpy as np

from ..errors import ValidationError


class ExpectationModelBundle:
    """Predecessor feature moments of a known kernel, keyed by current features.

    Args:
        features: (n_states, dim) matrix whose rows are state feature vectors.
            Rows must be pairwise distinct so a feature vector identifies its
            state.
        predecessor_matrix: (n_states, n_states) row-stochastic kernel; row
            ``s`` is the predecessor distribution of ``s``.
        reward_params: (dim, dim) bilinear reward head; the expected reward
            on the edge u -> s is ``features[u] @ reward_params @ features[s]``.
    """

    def __init__(self, features: np.ndarray, predecessor_matrix: np.ndarray, reward_params: np.ndarray):
        features = np.asarray(features, dtype=float)
        kernel = np.asarray(predecessor_matrix, dtype=float)
        reward_params = np.asarray(reward_params, dtype=float)
        n, dim = features.shape
        if kernel.shape != (n, n):
            raise ValidationError(f"kernel shape {kernel.shape} does not match {n} feature rows")
        if reward_params.shape != (dim, dim):
            raise ValidationError(f"reward head shape {reward_params.shape} does not match feature dim {dim}")
        self.features = features
        self.reward_params = reward_params
        # Per-state moments: mean predecessor feature and E[x x^T] under the kernel.
        self._mean = kernel @ features
        self._second = np.einsum("su,ui,uj->sij", kernel, features, features)

    def _state_of(self, x: np.ndarray) -> int:
        matches = np.where(np.all(self.features == x, axis=1))[0]
        if matches.size == 0:
            matches = np.where(np.all(np.isclose(self.features, x), axis=1))[0]
        if matches.size != 1:
            raise ValidationError("feature vector does not identify a unique state")
        return int(matches[0])

    def mean_predecessor(self, x: np.ndarray) -> np.ndarray:
        """E[predecessor features | current features x]."""
        return self._mean[self._state_of(x)]

    def predecessor_covariance(self, x: np.ndarray) -> np.ndarray:
        """E[outer(predecessor features) | current features x]; symmetric PSD."""
        return self._second[self._state_of(x)]

    def reward_vector(self, x: np.ndarray) -> np.ndarray:
        """E[predecessor features * reward(predecessor, current) | x]."""
        return self.predecessor_covariance(x) @ self.reward_params @ x


def expected_linear_backward_step(
    weights: np.ndarray,
    x: np.ndarray,
    bundle: ExpectationModelBundle,
    step_size: float,
    discount: float,
) -> np.ndarray:
    """One expected linear value update from the current state's features.

    Averages, in closed form, the sampled update
    ``w += a * (r + discount * w.x - w.x_pred) * x_pred`` over predecessors
    drawn from the bundle's kernel. Returns the new weight vector; the input
    is not modified.
    """
    weights = np.asarray(weights, dtype=float)
    x = np.asarray(x, dtype=float)
    if weights.shape != x.shape:
        raise ValidationError(f"weights shape {weights.shape} does not match features {x.shape}")
    mean = bundle.mean_predecessor(x)
    second = bundle.predecessor_covariance(x)
    drift = discount * np.outer(mean, x) - second
    return weights + step_size * (bundle.reward_vector(x) + drift @ weights)
