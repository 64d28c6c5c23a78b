"""Adagrad updates plus a finite-difference gradient checker.

Parameters and gradients travel as name -> array dicts so one optimizer
serves both networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonFiniteLoss, ShapeMismatch


@dataclass
class AdagradState:
    """Per-parameter squared-gradient accumulators and the step size.

    Accumulators only ever grow, which is what damps the effective step
    over time.
    """

    accumulators: dict[str, np.ndarray]
    learning_rate: float
    epsilon: float = 1e-8

    @classmethod
    def for_params(cls, params: dict[str, np.ndarray], learning_rate: float,
                   epsilon: float = 1e-8) -> "AdagradState":
        if learning_rate <= 0.0:
            raise ValueError(f"learning_rate must be positive, got {learning_rate}")
        return cls({k: np.zeros_like(v) for k, v in params.items()}, learning_rate, epsilon)


def adagrad_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                 state: AdagradState) -> tuple[dict[str, np.ndarray], AdagradState]:
    """One Adagrad update, in place: G += g*g; p -= lr * g / (sqrt(G) + eps)."""
    if set(params) != set(grads) or set(params) != set(state.accumulators):
        raise ShapeMismatch(
            f"parameter names differ: params={sorted(params)}, grads={sorted(grads)}, "
            f"accumulators={sorted(state.accumulators)}"
        )
    for name, p in params.items():
        g = grads[name]
        acc = state.accumulators[name]
        if g.shape != p.shape or acc.shape != p.shape:
            raise ShapeMismatch(
                f"{name}: params {p.shape}, grads {g.shape}, accumulators {acc.shape}"
            )
        acc += g * g
        p -= state.learning_rate * g / (np.sqrt(acc) + state.epsilon)
    return params, state


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so their global L2 norm is at most max_norm.

    Returns the pre-clip norm.
    """
    total = math.sqrt(sum(float(np.sum(g * g)) for g in grads.values()))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


def grad_check(loss_fn, params: dict[str, np.ndarray], analytic: dict[str, np.ndarray],
               h: float = 1e-5, sample: int | None = None, rng=None) -> float:
    """Max relative disagreement between analytic and central-difference gradients.

    loss_fn is called with the params dict; coordinates are perturbed in
    place one at a time, numeric = (f(p+h) - f(p-h)) / 2h, and the error is
    |a - n| / max(1, |a|, |n|). With `sample` set, only that many randomly
    chosen coordinates per tensor are probed; full-size networks are far too
    large for an exhaustive sweep.
    """
    if rng is None:
        rng = np.random.default_rng(0)
    if set(params) != set(analytic):
        raise ShapeMismatch(
            f"parameter names differ: params={sorted(params)}, analytic={sorted(analytic)}"
        )
    worst = 0.0
    for name in sorted(params):
        arr = params[name]
        a_arr = analytic[name]
        if arr.shape != a_arr.shape:
            raise ShapeMismatch(f"{name}: params {arr.shape}, analytic {a_arr.shape}")
        if sample is None or sample >= arr.size:
            coords = range(arr.size)
        else:
            coords = rng.choice(arr.size, size=sample, replace=False)
        for i in coords:
            idx = np.unravel_index(i, arr.shape)
            orig = arr[idx]
            arr[idx] = orig + h
            hi = float(loss_fn(params))
            arr[idx] = orig - h
            lo = float(loss_fn(params))
            arr[idx] = orig
            if not (math.isfinite(hi) and math.isfinite(lo)):
                raise NonFiniteLoss(f"{name}{list(idx)}: loss not finite at perturbed point")
            numeric = (hi - lo) / (2.0 * h)
            analytic_value = float(a_arr[idx])
            err = abs(analytic_value - numeric) / max(1.0, abs(analytic_value), abs(numeric))
            worst = max(worst, err)
    return worst
