"""Event extraction from simulated voltage traces.

Spikes are upward threshold crossings; runs of closely spaced spikes form
bursts.  Every episode yields an onset event and, once the membrane is
back near rest, a return event.  Onset causes come from the stimulus log,
so excitatory and inhibitory external drive are told apart without
looking at the waveform.
"""

from __future__ import annotations

import csv
import enum
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .automata import TransitionKind
from .builder import BETA, ETA, REBOUND, RHO, SIGMA, win_event
from .sim.circuit import CircuitSpec, StimulusProgram
from .sim.simulate import SimulationResult, resting_voltage


class AttributionConflict(ValueError):
    """Both excitatory and inhibitory pulses could explain one onset."""


class EpisodeKind(str, enum.Enum):
    SPIKE = "SPIKE"
    BURST = "BURST"


@dataclass(frozen=True)
class ExtractionConfig:
    threshold: float = 0.0
    rest_band: float = 3.0
    rest_hold: float = 10.0
    burst_isi: float = 30.0
    min_burst_spikes: int = 2
    attribution_window: float = 15.0

    def __post_init__(self):
        if not (self.rest_band > 0 and self.rest_hold > 0 and self.burst_isi > 0 and self.attribution_window > 0):
            raise ValueError("extraction parameters must be positive")
        if self.min_burst_spikes < 2:
            raise ValueError("a burst needs at least 2 spikes")

    def to_dict(self) -> dict:
        return {
            "threshold": self.threshold,
            "rest_band": self.rest_band,
            "rest_hold": self.rest_hold,
            "burst_isi": self.burst_isi,
            "min_burst_spikes": self.min_burst_spikes,
            "attribution_window": self.attribution_window,
        }


@dataclass(frozen=True)
class Episode:
    kind: EpisodeKind
    onset: float
    offset: float
    n_spikes: int


@dataclass(frozen=True)
class Event:
    neuron: str
    symbol: str
    cause: TransitionKind
    time: float
    step: int

    @property
    def label(self) -> str:
        return f"{self.symbol}{self.neuron}"

    @property
    def is_onset(self) -> bool:
        return self.symbol in (SIGMA, REBOUND, BETA)


@dataclass(frozen=True)
class EventTrace:
    events: tuple[Event, ...]
    seed: int | None = None
    config_hash: str = ""
    truncated: tuple[str, ...] = ()  # neurons whose last episode never returned to rest

    def __len__(self) -> int:
        return len(self.events)

    def onsets(self) -> list[Event]:
        return [e for e in self.events if e.is_onset]

    def for_neuron(self, nid: str) -> list[Event]:
        return [e for e in self.events if e.neuron == nid]

    def write_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time_ms", "neuron", "symbol", "cause"])
            for e in self.events:
                w.writerow([f"{e.time:.6g}", e.neuron, e.symbol, e.cause.value])


def detect_spikes(v: np.ndarray, dt: float, config: ExtractionConfig = ExtractionConfig()) -> np.ndarray:
    """Times of the first grid sample at or above threshold after being below it."""
    v = np.asarray(v)
    if v.size == 0:
        raise ValueError("empty voltage trace")
    idx = np.flatnonzero((v[:-1] < config.threshold) & (v[1:] >= config.threshold)) + 1
    return idx * dt


def group_episodes(times: Sequence[float], config: ExtractionConfig = ExtractionConfig()) -> list[Episode]:
    out: list[Episode] = []
    run: list[float] = []

    def close():
        if not run:
            return
        kind = EpisodeKind.BURST if len(run) >= config.min_burst_spikes else EpisodeKind.SPIKE
        out.append(Episode(kind, run[0], run[-1], len(run)))

    for t in times:
        if run and t - run[-1] > config.burst_isi:
            close()
            run = []
        run.append(float(t))
    close()
    return out


def onset_cause(
    stimulus: StimulusProgram, nid: str, t: float, config: ExtractionConfig = ExtractionConfig()
) -> TransitionKind:
    w = config.attribution_window
    exc = inh = False
    for p in stimulus.pulses.get(nid, ()):
        if p.amplitude > 0 and p.start <= t and t - p.end <= w:
            exc = True
        elif p.amplitude < 0 and p.end <= t and t - p.end <= w:
            inh = True
    if exc and inh:
        raise AttributionConflict(f"neuron {nid}: onset at t={t:g} ms follows both excitatory and inhibitory pulses")
    if exc:
        return TransitionKind.EXTERNAL_EXCITATORY
    if inh:
        return TransitionKind.EXTERNAL_INHIBITORY
    return TransitionKind.INTERNAL


def onset_symbol(kind: EpisodeKind, cause: TransitionKind) -> str:
    if kind is EpisodeKind.BURST:
        return BETA
    return REBOUND if cause is TransitionKind.EXTERNAL_INHIBITORY else SIGMA


def _neuron_events(
    v: np.ndarray, dt: float, v_rest: float, nid: str, stimulus: StimulusProgram, config: ExtractionConfig
) -> tuple[list[Event], bool]:
    spikes = detect_spikes(v, dt, config)
    events: list[Event] = []
    truncated = False
    hold = int(round(config.rest_hold / dt))
    below = v <= v_rest + config.rest_band
    for ep in group_episodes(spikes, config):
        cause = onset_cause(stimulus, nid, ep.onset, config)
        on_step = int(round(ep.onset / dt))
        events.append(Event(nid, onset_symbol(ep.kind, cause), cause, on_step * dt, on_step))
        last = int(round(ep.offset / dt))
        back = np.flatnonzero(below[last:])
        if back.size == 0 or last + back[0] + hold > len(v) - 1:
            truncated = True
            break
        step = last + int(back[0])
        ret = RHO if ep.kind is EpisodeKind.BURST else ETA
        events.append(Event(nid, ret, TransitionKind.INTERNAL, step * dt, step))
    return events, truncated


def config_hash(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def extract_trace(
    result: SimulationResult, circuit: CircuitSpec, config: ExtractionConfig = ExtractionConfig()
) -> EventTrace:
    """Per-neuron episodes turned into onset/return events, merged in time order."""
    events: list[Event] = []
    truncated = []
    order = {nid: k for k, nid in enumerate(result.neuron_ids)}
    for neuron in circuit.neurons:
        evs, trunc = _neuron_events(
            result.v(neuron.id), result.dt, resting_voltage(neuron), neuron.id, result.stimulus, config
        )
        events.extend(evs)
        if trunc:
            truncated.append(neuron.id)
    events.sort(key=lambda e: (e.step, order[e.neuron]))
    h = config_hash(result.config.to_dict(), config.to_dict())
    return EventTrace(tuple(events), result.seed, h, tuple(truncated))


def untime(trace: EventTrace, *, internal_onsets: bool = False) -> str:
    """Whitespace-separated event tokens in time order.

    Onsets with an internal cause are synchronized with another neuron's
    event in the network model, so they are omitted unless requested.
    Events sharing an integration step are joined by ``+`` into one token.
    """
    groups: list[tuple[int, list[str]]] = []
    for e in trace.events:
        if e.is_onset and e.cause is TransitionKind.INTERNAL and not internal_onsets:
            continue
        if groups and groups[-1][0] == e.step:
            groups[-1][1].append(e.label)
        else:
            groups.append((e.step, [e.label]))
    return " ".join("+".join(labels) for _, labels in groups)


def tokens(s: str | Iterable[str]) -> list[str]:
    return s.split() if isinstance(s, str) else list(s)


def winner_sequence(result: SimulationResult, config: ExtractionConfig = ExtractionConfig()) -> list[str]:
    """Neuron ids in order of their spikes (every spike counts as a win)."""
    spikes = []
    for k, nid in enumerate(result.neuron_ids):
        for t in detect_spikes(result.v(nid), result.dt, config):
            spikes.append((t, k, nid))
    spikes.sort()
    return [nid for _, _, nid in spikes]


def winner_string(winners: Sequence[str]) -> str:
    """Win events for a winner sequence starting from the idle state."""
    prev = "i"
    out = []
    for w in winners:
        out.append(win_event(prev, w))
        prev = w
    return " ".join(out)


def overlap_steps(result: SimulationResult, config: ExtractionConfig = ExtractionConfig()) -> int:
    """Number of grid points where more than one neuron is above threshold."""
    return int(np.sum((result.voltages > config.threshold).sum(axis=1) > 1))


def repeated_wins(winners: Sequence[str]) -> int:
    return sum(1 for a, b in zip(winners, winners[1:]) if a == b)


__all__ = [
    "AttributionConflict",
    "EpisodeKind",
    "Episode",
    "Event",
    "EventTrace",
    "ExtractionConfig",
    "detect_spikes",
    "group_episodes",
    "extract_trace",
    "untime",
    "winner_sequence",
    "winner_string",
]
