"""Training losses and their subgradients.

All losses are built on absolute error. The subgradient of |p - t| at p = t
is taken to be 0, which keeps exact fits stationary.
"""

from __future__ import annotations

import numpy as np

from .exceptions import ConfigError, ShapeError


def mae_loss(pred: np.ndarray, truth: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean absolute error and its subgradient with respect to pred."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape or pred.size == 0:
        raise ShapeError(f"pred {pred.shape} and truth {truth.shape} must match and be non-empty")
    diff = pred - truth
    loss = float(np.mean(np.abs(diff)))
    grad = np.sign(diff) / diff.size
    return loss, grad


def weighted_feature_loss(
    pred: np.ndarray, truth: np.ndarray, alphas: np.ndarray
) -> tuple[float, np.ndarray]:
    """Per-feature absolute errors weighted by alphas (alphas in [0,1], sum 1)."""
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    alphas = np.asarray(alphas, dtype=np.float64)
    if not (pred.shape == truth.shape == alphas.shape):
        raise ShapeError("pred, truth and alphas must have identical shapes")
    if np.any(alphas < 0.0) or np.any(alphas > 1.0):
        raise ConfigError("feature weights must lie in [0, 1]")
    if abs(float(alphas.sum()) - 1.0) > 1e-9:
        raise ConfigError(f"feature weights must sum to 1, got {float(alphas.sum())!r}")
    diff = pred - truth
    loss = float(np.sum(alphas * np.abs(diff)))
    grad = alphas * np.sign(diff)
    return loss, grad


def target_replication_loss(
    step_preds: np.ndarray, final_truth: float, alpha: float
) -> tuple[float, np.ndarray]:
    """Blend the final-step error with the mean error of every earlier step.

    Every step is scored against the final truth:

        alpha * mean_{t<T} |pred_t - truth| + (1 - alpha) * |pred_T - truth|

    For a single-step sequence the first term is 0.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ConfigError(f"alpha must lie in [0, 1], got {alpha!r}")
    preds = np.asarray(step_preds, dtype=np.float64)
    if preds.ndim != 1 or preds.size < 1:
        raise ShapeError("step_preds must be a non-empty 1-d array")
    diff = preds - float(final_truth)
    n = preds.size
    grads = np.zeros(n)
    final = float(abs(diff[-1]))
    grads[-1] = (1.0 - alpha) * np.sign(diff[-1])
    if n == 1:
        return (1.0 - alpha) * final, grads
    early = float(np.mean(np.abs(diff[:-1])))
    grads[:-1] = alpha * np.sign(diff[:-1]) / (n - 1)
    return alpha * early + (1.0 - alpha) * final, grads
