"""Adaptive-moment gradient optimizer over flat vectors, functional style:
`grad_step` returns the updated state and parameters."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import InvalidConfig, InvalidGradient


@dataclass(frozen=True)
class GradOptState:
    step_size: float
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    first_moment: np.ndarray = None
    second_moment: np.ndarray = None
    step: int = 0


def grad_init(dim: int, step_size: float, beta1: float = 0.9, beta2: float = 0.999,
              epsilon: float = 1e-8) -> GradOptState:
    if step_size <= 0:
        raise InvalidConfig("step size must be positive")
    if not (0 < beta1 < 1 and 0 < beta2 < 1):
        raise InvalidConfig("betas must lie in (0, 1)")
    return GradOptState(step_size=step_size, beta1=beta1, beta2=beta2,
                        epsilon=epsilon, first_moment=np.zeros(dim),
                        second_moment=np.zeros(dim), step=0)


def grad_step(state: GradOptState, params: np.ndarray,
              gradient: np.ndarray) -> tuple[GradOptState, np.ndarray]:
    """One bias-corrected adaptive-moment update."""
    params = np.asarray(params, dtype=np.float64)
    gradient = np.asarray(gradient, dtype=np.float64)
    if params.shape != gradient.shape or params.shape != state.first_moment.shape:
        raise InvalidGradient("parameter/gradient shape mismatch")
    if not np.isfinite(gradient).all():
        raise InvalidGradient("non-finite gradient")
    t = state.step + 1
    m = state.beta1 * state.first_moment + (1 - state.beta1) * gradient
    v = state.beta2 * state.second_moment + (1 - state.beta2) * gradient ** 2
    m_hat = m / (1 - state.beta1 ** t)
    v_hat = v / (1 - state.beta2 ** t)
    new_params = params - state.step_size * m_hat / (np.sqrt(v_hat) + state.epsilon)
    return replace(state, first_moment=m, second_moment=v, step=t), new_params
