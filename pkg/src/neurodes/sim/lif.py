"""Leaky integrator with reset."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .circuit import CircuitError, LIFSpec, SimConfig
from .kernel import lif_integrate

Input = float | Sequence[tuple[float, float]]


@dataclass(frozen=True)
class LIFResult:
    t: np.ndarray
    x: np.ndarray
    reset_times: np.ndarray

    @property
    def intervals(self) -> np.ndarray:
        return np.diff(self.reset_times)


def sample_input(u: Input, config: SimConfig) -> np.ndarray:
    """Sample a piecewise-constant input at the start of every step.

    ``u`` is either a constant or a list of ``(t_start, value)`` breakpoints
    sorted by time; the input is 0 before the first breakpoint.
    """
    n = config.n_steps
    t = np.arange(n) * config.dt
    if np.isscalar(u):
        return np.full(n, float(u))
    out = np.zeros(n)
    last = -np.inf
    for start, value in u:
        if start < last:
            raise CircuitError("LIF input breakpoints must be sorted by time")
        last = start
        out[t >= start - 1e-9 * config.dt] = float(value)
    return out


def simulate_lif(spec: LIFSpec, u: Input, config: SimConfig, x0: float = 0.0) -> LIFResult:
    """Integrate dx/dt = -alpha x + u, resetting x to 0 whenever it exceeds theta."""
    samples = sample_input(u, config)
    x, resets = lif_integrate(float(x0), spec.alpha, spec.theta, config.dt, samples)
    t = np.arange(config.n_steps + 1) * config.dt
    return LIFResult(t, x, t[1:][resets])


def reset_period(spec: LIFSpec, c: float) -> float:
    """Closed-form inter-reset interval for a constant input c (inf if never reached)."""
    if c / spec.alpha <= spec.theta:
        return float("inf")
    return float(np.log(c / (c - spec.alpha * spec.theta)) / spec.alpha)
