"""Compile a self-loop-free automaton into a winner-take-all circuit.

Every automaton state gets a rebound-spiking neuron; all neurons inhibit
each other, and every transition becomes a slow excitatory synapse from
the source state's neuron to the target's.  Noise is added only when some
state has a choice (or no successor) so that the circuit can break ties.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .automata import INTERNAL, Automaton, accepts, has_self_loops, isomorphic, restrict
from .builder import apply_excitatory_restriction, winner_state, wta_automaton
from .events import ExtractionConfig, overlap_steps, repeated_wins, winner_sequence
from .library import kick, profile_noise, realized_circuit
from .sim.circuit import CircuitSpec, SimConfig, SynapseKind
from .sim.simulate import simulate


class RealizationError(ValueError):
    pass


@dataclass(frozen=True)
class RealizationPlan:
    state_map: dict[str, str]  # automaton state -> neuron id
    synapses: dict[tuple[str, str, str], tuple[str, str]]  # transition -> (pre, post)
    circuit: CircuitSpec
    initial: str

    @property
    def n(self) -> int:
        return len(self.state_map)

    @property
    def edges(self) -> set[tuple[int, int]]:
        return {(int(pre), int(post)) for pre, post in self.synapses.values()}

    def state_of(self, nid: str) -> str:
        return {v: k for k, v in self.state_map.items()}[nid]

    def counts(self) -> tuple[int, int, int]:
        inh = sum(1 for s in self.circuit.synapses if s.kind is SynapseKind.INHIBITORY)
        exc = sum(1 for s in self.circuit.synapses if s.kind is SynapseKind.EXCITATORY)
        return len(self.circuit.neurons), inh, exc

    def to_dict(self) -> dict:
        return {
            "initial": self.initial,
            "state_map": dict(self.state_map),
            "synapses": [
                {"transition": [s, e, d], "pre": pre, "post": post}
                for (s, e, d), (pre, post) in sorted(self.synapses.items())
            ],
            "circuit": self.circuit.to_dict(),
        }

    def write(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def realize(a: Automaton, noise: float | None = None) -> RealizationPlan:
    """Build the circuit plan for ``a``.

    Neurons are numbered with the initial state first and the others in
    sorted order.  At most one transition per ordered state pair is
    allowed, since parallel edges would map to duplicate synapses.
    """
    if len(a.states) < 2:
        raise RealizationError("realization needs at least 2 states")
    if has_self_loops(a):
        raise RealizationError("automata with self-loops cannot be realized by a winner-take-all circuit")
    pairs = [(s, d) for s, _, d in a.transitions]
    if len(set(pairs)) != len(pairs):
        raise RealizationError("more than one transition between the same ordered pair of states")
    order = [a.initial] + sorted(a.states - {a.initial})
    state_map = {s: str(k) for k, s in enumerate(order, start=1)}
    synapses = {t: (state_map[t[0]], state_map[t[2]]) for t in sorted(a.transitions)}
    outdeg = {s: 0 for s in a.states}
    for s, _, _ in a.transitions:
        outdeg[s] += 1
    if noise is None:
        noise = profile_noise("realization") if any(d != 1 for d in outdeg.values()) else 0.0
    edges = [(int(p), int(q)) for p, q in synapses.values()]
    circuit = realized_circuit(len(order), edges, noise)
    return RealizationPlan(state_map, synapses, circuit, a.initial)


@dataclass(frozen=True)
class RoundTrip:
    passed: bool
    witness: dict[str, str] | None = None
    mismatch: str = ""


def winner_graph(plan: RealizationPlan) -> Automaton:
    """Internal winner-to-winner dynamics of the realized circuit."""
    wta = apply_excitatory_restriction(wta_automaton(plan.n), plan.edges, keep_undesignated=False)
    winners = [winner_state(k) for k in range(1, plan.n + 1)]
    return restrict(wta, kinds=(INTERNAL,), states=winners, initial=winner_state(plan.state_map[plan.initial]))


def round_trip_check(a: Automaton) -> RoundTrip:
    plan = realize(a)
    back = winner_graph(plan)
    ok, witness = isomorphic(a, back, match_events=False, match_kinds=False)
    if ok:
        return RoundTrip(True, witness)
    # name the first structural difference under the plan's own state map
    edges_a = {(plan.state_map[s], plan.state_map[d]) for s, _, d in a.transitions}
    edges_b = {(s[1:], d[1:]) for s, _, d in back.transitions}
    for p, q in sorted(edges_a ^ edges_b):
        side = "missing from circuit" if (p, q) in edges_a else "extra in circuit"
        return RoundTrip(False, None, f"edge {plan.state_of(p)}->{plan.state_of(q)} {side}")
    return RoundTrip(False, None, "state or initial-state mismatch")


def trial_seeds(seed: int, trials: int) -> list[int]:
    """Independent per-trial seeds derived from a master seed."""
    ss = np.random.SeedSequence(seed)
    return [int(c.generate_state(1)[0]) for c in ss.spawn(trials)]


@dataclass(frozen=True)
class TrialOutcome:
    seed: int
    states: tuple[str, ...]
    overlap_steps: int
    repeated: int

    @property
    def transitions(self) -> set[tuple[str, str]]:
        return set(zip(self.states, self.states[1:]))


def realize_and_simulate(
    a: Automaton,
    trials: int,
    seed: int = 0,
    t_end: float = 300.0,
    dt: float = 0.01,
    plan: RealizationPlan | None = None,
) -> list[TrialOutcome]:
    """Kick the initial state's neuron and read back the visited automaton states."""
    plan = realize(a) if plan is None else plan
    stim = kick(plan.state_map[plan.initial])
    out = []
    for s in trial_seeds(seed, trials):
        r = simulate(plan.circuit, stim, SimConfig(dt, t_end, s))
        winners = winner_sequence(r, ExtractionConfig())
        out.append(
            TrialOutcome(s, tuple(plan.state_of(w) for w in winners), overlap_steps(r), repeated_wins(winners))
        )
    return out


def is_path(a: Automaton, states: Sequence[str]) -> bool:
    """True when consecutive states are joined by transitions of ``a`` starting at its initial state."""
    if not states:
        return True
    if states[0] != a.initial:
        return False
    succ = {(s, d) for s, _, d in a.transitions}
    return all((p, q) in succ for p, q in zip(states, states[1:]))


def path_events(a: Automaton, states: Sequence[str]) -> list[str]:
    """Events along a state path (the automaton is deterministic per event, not per pair)."""
    lookup: Mapping[tuple[str, str], str] = {(s, d): e for s, e, d in sorted(a.transitions)}
    return [lookup[(p, q)] for p, q in zip(states, states[1:])]


def accepts_path(a: Automaton, states: Sequence[str]) -> bool:
    return is_path(a, states) and accepts(a, path_events(a, states))


def random_automaton(rng: np.random.Generator, n_states: int, density: float) -> Automaton:
    """Self-loop-free automaton with one event per edge; every state reachable from the first."""
    names = [f"q{k}" for k in range(n_states)]
    edges = set()
    for j in range(n_states):
        for k in range(n_states):
            if j != k and rng.random() < density:
                edges.add((j, k))
    # states 0..k-1 are reachable by induction, so any of them can adopt state k
    for k in range(1, n_states):
        if not _reachable(edges, n_states)[k]:
            edges.add((int(rng.integers(0, k)), k))
    trans = {(names[j], f"e_{j}_{k}", names[k]) for j, k in edges}
    return Automaton(names, {f"e_{j}_{k}": INTERNAL for j, k in edges}, trans, names[0])


def _reachable(edges, n) -> list[bool]:
    seen = [False] * n
    seen[0] = True
    stack = [0]
    while stack:
        j = stack.pop()
        for p, q in edges:
            if p == j and not seen[q]:
                seen[q] = True
                stack.append(q)
    return seen


__all__ = [
    "RealizationError",
    "RealizationPlan",
    "RoundTrip",
    "TrialOutcome",
    "realize",
    "round_trip_check",
    "realize_and_simulate",
    "winner_graph",
    "random_automaton",
    "is_path",
    "accepts_path",
    "trial_seeds",
]
