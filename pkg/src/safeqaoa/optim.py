"""Mask-aware Adam optimizer used by every training stage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingAbortedError

DEFAULT_LEARNING_RATE = 0.02
DEFAULT_BETA1 = 0.9
DEFAULT_BETA2 = 0.999
DEFAULT_EPSILON = 1e-8


@dataclass
class AdamState:
    """First/second moment estimates for one parameter vector."""

    dim: int
    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETA1
    beta2: float = DEFAULT_BETA2
    epsilon: float = DEFAULT_EPSILON
    step_count: int = 0
    first_moment: np.ndarray = field(default=None)
    second_moment: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.first_moment is None:
            self.first_moment = np.zeros(self.dim)
        if self.second_moment is None:
            self.second_moment = np.zeros(self.dim)


def adam_step(state: AdamState, values: np.ndarray, active: np.ndarray, gradient: np.ndarray) -> None:
    """One in-place Adam update restricted to active parameter entries.

    Inactive entries receive neither moment accumulation nor value updates, so
    a distilled parameter stays exactly zero for the rest of the run.
    """
    if gradient.shape != values.shape:
        raise ValueError(f"gradient shape {gradient.shape} != values shape {values.shape}")
    if not np.all(np.isfinite(gradient[active])):
        raise TrainingAbortedError("non-finite gradient encountered")
    state.step_count += 1
    g = np.where(active, gradient, 0.0)
    state.first_moment *= state.beta1
    state.first_moment += (1.0 - state.beta1) * g
    state.second_moment *= state.beta2
    state.second_moment += (1.0 - state.beta2) * g * g
    m_hat = state.first_moment / (1.0 - state.beta1**state.step_count)
    v_hat = state.second_moment / (1.0 - state.beta2**state.step_count)
    update = state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    values[active] -= update[active]
