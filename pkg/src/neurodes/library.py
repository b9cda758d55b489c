"""Ready-made neurons, circuits and stimuli built from the bundled profiles."""

from __future__ import annotations

from typing import Iterable

from .sim.circuit import (
    BehaviorClass,
    Bundle,
    CircuitSpec,
    NeuronSpec,
    Pulse,
    SimConfig,
    StimulusProgram,
    SynapseKind,
    SynapseSpec,
    SynapseSpeed,
    load_profile,
)


def hh_neuron(nid: str | int, behavior: BehaviorClass | str = BehaviorClass.EXCITABLE, noise: float = 0.0) -> NeuronSpec:
    """Classic squid-axon neuron. The same channel set serves EXCITABLE and REBOUND_SPIKING."""
    d = load_profile("hh.json")
    d.update(id=str(nid), noise_amplitude=noise, **{"class": BehaviorClass(behavior).value})
    return NeuronSpec.from_dict(d)


def burster_neuron(nid: str | int, noise: float = 0.0) -> NeuronSpec:
    """HH plus a T-type calcium and a slow potassium current."""
    d = load_profile("hh_cat_ks.json")
    d.update(id=str(nid), noise_amplitude=noise)
    return NeuronSpec.from_dict(d)


def profile_synapse(pre, post, kind: SynapseKind | str, profile: str, speed: SynapseSpeed | str | None = None) -> SynapseSpec:
    kind = SynapseKind(kind)
    params = load_profile("synapses.json")[profile][kind.value]
    if speed is None:
        speed = SynapseSpeed.SLOW if (profile == "realization" and kind is SynapseKind.EXCITATORY) else SynapseSpeed.FAST
    return SynapseSpec(str(pre), str(post), kind, SynapseSpeed(speed), **params)


def profile_noise(profile: str) -> float:
    return float(load_profile("synapses.json")[profile]["noise_amplitude"])


def kick(nid: str | int, start: float | None = None) -> StimulusProgram:
    """The single excitatory pulse used to start network activity."""
    k = load_profile("synapses.json")["kick"]
    return StimulusProgram({str(nid): (Pulse(k["start"] if start is None else start, k["duration"], k["amplitude"]),)})


def steer_pulse(start: float) -> Pulse:
    s = load_profile("synapses.json")["steer"]
    return Pulse(start, s["duration"], s["amplitude"])


def steer_delay() -> float:
    return float(load_profile("synapses.json")["steer"]["delay"])


def wta_circuit(n: int, noise: float | None = None) -> CircuitSpec:
    """N rebound-spiking neurons with all-to-all fast inhibition."""
    noise = profile_noise("wta") if noise is None else noise
    neurons = tuple(hh_neuron(k, BehaviorClass.REBOUND_SPIKING, noise) for k in range(1, n + 1))
    syns = tuple(
        profile_synapse(j, k, SynapseKind.INHIBITORY, "wta")
        for j in range(1, n + 1)
        for k in range(1, n + 1)
        if j != k
    )
    return CircuitSpec(neurons, syns)


def hco_circuit(noise: float = 0.0) -> CircuitSpec:
    """Half-center oscillator: two rebound-spiking neurons inhibiting each other."""
    return wta_circuit(2, noise)


def chain_circuit(kind: SynapseKind | str, noise: float = 0.0) -> CircuitSpec:
    """Two rebound-spiking neurons with one synapse 1 -> 2."""
    kind = SynapseKind(kind)
    profile = "realization" if kind is SynapseKind.EXCITATORY else "wta"
    neurons = (hh_neuron(1, BehaviorClass.REBOUND_SPIKING, noise), hh_neuron(2, BehaviorClass.REBOUND_SPIKING, noise))
    return CircuitSpec(neurons, (profile_synapse(1, 2, kind, profile, SynapseSpeed.FAST),))


def realized_circuit(n: int, edges: Iterable[tuple[int, int]], noise: float) -> CircuitSpec:
    """Winner-take-all circuit plus one slow excitatory synapse per edge (1-based neuron ids)."""
    neurons = tuple(hh_neuron(k, BehaviorClass.REBOUND_SPIKING, noise) for k in range(1, n + 1))
    inh = [
        profile_synapse(j, k, SynapseKind.INHIBITORY, "realization")
        for j in range(1, n + 1)
        for k in range(1, n + 1)
        if j != k
    ]
    exc = [profile_synapse(j, k, SynapseKind.EXCITATORY, "realization") for j, k in edges]
    return CircuitSpec(neurons, tuple(inh + exc))


def excitability_bundle() -> Bundle:
    """One HH neuron, a subthreshold and a suprathreshold 2 ms pulse."""
    circuit = CircuitSpec((hh_neuron(1),), ())
    stim = StimulusProgram({"1": (Pulse(5.0, 2.0, 3.75), Pulse(35.0, 2.0, 3.95))})
    return Bundle(circuit, stim, SimConfig(0.01, 60.0, 0))


def rebound_bundles() -> tuple[Bundle, Bundle]:
    """Burster under a depolarizing pulse and after release from hyperpolarization."""
    circuit = CircuitSpec((burster_neuron(1),), ())
    dep = StimulusProgram({"1": (Pulse(20.0, 2.0, 10.0),)})
    hyp = StimulusProgram({"1": (Pulse(20.0, 200.0, -2.0),)})
    return Bundle(circuit, dep, SimConfig(0.01, 150.0, 0)), Bundle(circuit, hyp, SimConfig(0.01, 400.0, 0))


def hco_bundle(t_end: float = 600.0) -> Bundle:
    return Bundle(hco_circuit(), kick(1), SimConfig(0.01, t_end, 0))
