"""Seeded network experiments: free-running WTA trials and input steering."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .events import ExtractionConfig, detect_spikes, overlap_steps, repeated_wins, winner_sequence
from .library import kick, steer_delay, steer_pulse, wta_circuit
from .sim.circuit import CircuitSpec, SimConfig, StimulusProgram
from .sim.simulate import simulate


@dataclass(frozen=True)
class WTATrial:
    seed: int
    winners: tuple[str, ...]
    overlap_steps: int
    repeated: int


def wta_trial(circuit: CircuitSpec, seed: int, t_end: float = 1000.0, dt: float = 0.01) -> WTATrial:
    """Kick neuron 1 and let noise pick the successive winners."""
    r = simulate(circuit, kick(circuit.ids[0]), SimConfig(dt, t_end, seed))
    w = winner_sequence(r)
    return WTATrial(seed, tuple(w), overlap_steps(r), repeated_wins(w))


@dataclass(frozen=True)
class SteeringTrial:
    seed: int
    winner: str
    target: str
    next_winner: str | None
    overlap_steps: int

    @property
    def steered(self) -> bool:
        return self.next_winner == self.target and self.overlap_steps == 0


def steering_trial(
    circuit: CircuitSpec, seed: int, settle: float = 300.0, window: float = 60.0, dt: float = 0.01
) -> SteeringTrial:
    """Run freely, then pulse a designated non-winner shortly after the current winner fired.

    The run is continued from the stored network state ``steer_delay`` ms
    after the last winner's spike; the target is drawn from the trial's
    generator among the non-winners.
    """
    rng = np.random.default_rng(seed)
    r = simulate(circuit, kick(circuit.ids[0]), SimConfig(dt, settle, seed))
    delay = steer_delay()
    cfg = ExtractionConfig()
    last = []
    for nid in r.neuron_ids:
        for t in detect_spikes(r.v(nid), dt, cfg):
            if t + delay < settle:
                last.append((t, nid))
    t_win, winner = max(last)
    target = str(rng.choice([n for n in r.neuron_ids if n != winner]))
    start = int(round((t_win + delay) / dt))
    stim = StimulusProgram({target: (steer_pulse(0.0),)})
    r2 = simulate(circuit, stim, SimConfig(dt, window, seed + 1), initial_state=r.states[start])
    w = winner_sequence(r2)
    return SteeringTrial(seed, winner, target, w[0] if w else None, overlap_steps(r2))


def default_wta(n: int = 3) -> CircuitSpec:
    return wta_circuit(n)
