"""Check an extracted event trace against the network automaton."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .automata import Automaton, AutomatonError
from .builder import NetworkTopology, build_network_des, local_states
from .events import EventTrace, ExtractionConfig, extract_trace, untime
from .sim.circuit import CircuitSpec, StimulusProgram
from .sim.simulate import SimulationResult


@dataclass(frozen=True)
class ConformanceReport:
    conform: bool
    string: str
    accepted_prefix: str
    failing_token: str | None = None
    reason: str = ""

    def to_dict(self) -> dict:
        return {
            "conform": self.conform,
            "string": self.string,
            "accepted_prefix": self.accepted_prefix,
            "failing_token": self.failing_token,
            "reason": self.reason,
        }


def topology_from_circuit(circuit: CircuitSpec, stimulus: StimulusProgram) -> NetworkTopology:
    """Neurons receiving any programmed pulse are the interactable ones."""
    stimulated = {nid for nid, pulses in stimulus.pulses.items() if pulses}
    return NetworkTopology.from_circuit(circuit, stimulated)


def _advance(des: Automaton, state: str, token: str) -> str | None:
    labels = token.split("+")
    for perm in itertools.permutations(labels):
        cur = state
        for e in perm:
            cur = des.step(cur, e) if cur is not None else None
        if cur is not None:
            return cur
    return None


def check_trace(trace: EventTrace, des: Automaton, topology: NetworkTopology) -> ConformanceReport:
    """Replay the trace on the automaton.

    External onsets and returns must be accepted transitions.  Onsets with
    an internal cause have no symbol of their own; they are checked
    against the automaton state instead: the neuron must already be active
    there.
    """
    string = untime(trace)
    state = des.initial
    done: list[str] = []
    groups: list[list] = []
    for e in trace.events:
        if groups and groups[-1][0].step == e.step:
            groups[-1].append(e)
        else:
            groups.append([e])
    for group in groups:
        internal = [e for e in group if e.is_onset and e.cause.value == "INTERNAL"]
        visible = [e for e in group if e not in internal]
        if visible:
            token = "+".join(e.label for e in visible)
            nxt = _advance(des, state, token)
            if nxt is None:
                return ConformanceReport(
                    False, string, " ".join(done), token, f"{token} not enabled in state {state} at t={group[0].time:g} ms"
                )
            state = nxt
            done.append(token)
        for e in internal:
            try:
                local = local_states(topology, state)
            except AutomatonError as exc:
                return ConformanceReport(False, string, " ".join(done), e.label, str(exc))
            if local.get(e.neuron, "i") == "i":
                return ConformanceReport(
                    False,
                    string,
                    " ".join(done),
                    e.label,
                    f"neuron {e.neuron} fired at t={e.time:g} ms without input while idle in state {state}",
                )
    return ConformanceReport(True, string, " ".join(done))


def check_conformance(
    result: SimulationResult,
    circuit: CircuitSpec,
    topology: NetworkTopology | None = None,
    config: ExtractionConfig = ExtractionConfig(),
    *,
    stimulate_at_rest: bool = True,
) -> ConformanceReport:
    """Extract, build the network automaton and replay.

    With ``stimulate_at_rest`` the model admits outside input only while the
    whole network rests, so inputs reaching two neurons in the same step or
    while another neuron is active count as violations.
    """
    topology = topology_from_circuit(circuit, result.stimulus) if topology is None else topology
    des = build_network_des(topology, stimulate_at_rest=stimulate_at_rest)
    return check_trace(extract_trace(result, circuit, config), des, topology)
