"""Continuous-time simulation of conductance-based circuits."""

from __future__ import annotations

import csv
import functools
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping

import numpy as np

from . import kernel
from .circuit import (
    CircuitError,
    CircuitSpec,
    GateKinetics,
    NeuronSpec,
    SimConfig,
    StimulusProgram,
    SynapseSpec,
)

_FORM_CODES = {"exp": kernel.EXP, "sigmoid": kernel.LOGISTIC, "linexp": kernel.LINEXP}

RELAX_START_V = -65.0
RELAX_DURATION = 500.0
REST_RESIDUAL = 1e-3  # mV/ms


class IntegrationDiverged(RuntimeError):
    def __init__(self, neuron: str, time: float):
        super().__init__(f"integration diverged in neuron {neuron} at t={time:.4f} ms")
        self.neuron = neuron
        self.time = time


class NonRestingModel(RuntimeError):
    """The neuron has no stable resting state reachable by relaxation."""


@dataclass(frozen=True)
class StateLayout:
    """Where each neuron's voltage, gates and synaptic activations live in y."""

    v_index: Mapping[str, int]
    gate_index: Mapping[str, Mapping[str, int]]  # neuron -> "chan.m"/"chan.h" -> index
    synapse_index: tuple[int, ...]
    dim: int


class CompiledCircuit:
    """Flat-array form of a CircuitSpec, ready for the numba kernel."""

    def __init__(self, circuit: CircuitSpec):
        self.circuit = circuit
        ids = circuit.ids
        pos = {nid: k for k, nid in enumerate(ids)}
        n = len(ids)
        self.neuron_pos = pos

        cap, gl, el = [], [], []
        v_index: dict[str, int] = {}
        gate_index: dict[str, dict[str, int]] = {}
        g_kind, g_par, g_idx, g_neuron = [], [], [], []
        c_neuron, c_gmax, c_erev, c_p, c_q, c_act, c_inact = [], [], [], [], [], [], []
        idx = 0
        self._gates: list[GateKinetics] = []
        for k, nrn in enumerate(circuit.neurons):
            cap.append(nrn.C)
            gl.append(nrn.g_leak)
            el.append(nrn.e_leak)
            v_index[nrn.id] = idx
            idx += 1
            gate_index[nrn.id] = {}
            for ch in nrn.channels:
                refs = []
                for suffix, gate in (("m", ch.activation), ("h", ch.inactivation)):
                    if gate is None:
                        refs.append(-1)
                        continue
                    gate_index[nrn.id][f"{ch.name}.{suffix}"] = idx
                    refs.append(len(g_kind))
                    g_kind.append(kernel.RATES if gate.kind == "rates" else kernel.SIGMOID)
                    g_par.append(_gate_params(gate))
                    g_idx.append(idx)
                    g_neuron.append(k)
                    self._gates.append(gate)
                    idx += 1
                c_neuron.append(k)
                c_gmax.append(ch.g_max)
                c_erev.append(ch.e_rev)
                c_p.append(ch.activation_exponent)
                c_q.append(ch.inactivation_exponent)
                c_act.append(refs[0])
                c_inact.append(refs[1])
        syn_idx = []
        for s in circuit.synapses:
            syn_idx.append(idx)
            idx += 1
        syn = circuit.synapses
        self.layout = StateLayout(v_index, gate_index, tuple(syn_idx), idx)
        i64 = np.int64
        self.arrays = (
            np.array(cap, float), np.array(gl, float), np.array(el, float),
            np.array([v_index[i] for i in ids], i64),
            np.array(g_kind, i64), np.array(g_par, float).reshape(len(g_kind), 9),
            np.array(g_idx, i64), np.array(g_neuron, i64),
            np.array(c_neuron, i64), np.array(c_gmax, float), np.array(c_erev, float),
            np.array(c_p, i64), np.array(c_q, i64), np.array(c_act, i64), np.array(c_inact, i64),
            np.array([pos[s.pre] for s in syn], i64), np.array([pos[s.post] for s in syn], i64),
            np.array([s.g_syn for s in syn], float), np.array([s.e_syn for s in syn], float),
            np.array([s.v_half for s in syn], float), np.array([s.slope for s in syn], float),
            np.array([s.tau_rise for s in syn], float), np.array([s.tau_decay for s in syn], float),
            np.array(syn_idx, i64),
        )
        self.n_neurons = n

    def steady_state_at(self, voltages: Mapping[str, float]) -> np.ndarray:
        """State with every gate and synapse at its steady state for the given voltages."""
        y = np.empty(self.layout.dim)
        for nrn in self.circuit.neurons:
            v = voltages[nrn.id]
            y[self.layout.v_index[nrn.id]] = v
            for ch in nrn.channels:
                for suffix, gate in (("m", ch.activation), ("h", ch.inactivation)):
                    if gate is not None:
                        y[self.layout.gate_index[nrn.id][f"{ch.name}.{suffix}"]] = float(gate.steady_state(v))
        for s, j in zip(self.circuit.synapses, self.layout.synapse_index):
            y[j] = synapse_target(s, voltages[s.pre])
        return y

    def integrate(self, y0: np.ndarray, dt: float, i_inj: np.ndarray):
        return kernel.integrate(np.asarray(y0, float), float(dt), np.ascontiguousarray(i_inj, float), *self.arrays)

    def derivative(self, y: np.ndarray, i_inj: np.ndarray | None = None) -> np.ndarray:
        dy = np.empty_like(y)
        cur = np.zeros(self.n_neurons) if i_inj is None else np.asarray(i_inj, float)
        kernel.rhs(np.asarray(y, float), cur, dy, *self.arrays)
        return dy


def _gate_params(gate: GateKinetics) -> list[float]:
    if gate.kind == "rates":
        a, b = gate.alpha, gate.beta
        return [
            _FORM_CODES[a.form], a.scale, a.v_half, a.slope,
            _FORM_CODES[b.form], b.scale, b.v_half, b.slope, 0.0,
        ]
    return [gate.v_half, gate.slope, gate.tau_base, gate.tau_amp, gate.tau_v, gate.tau_s1, gate.tau_s2, 0.0, 0.0]


def synapse_target(syn: SynapseSpec, v_pre: float) -> float:
    """Sigmoid of the presynaptic voltage the activation relaxes toward."""
    return float(1.0 / (1.0 + np.exp(-(v_pre - syn.v_half) / syn.slope)))


def synaptic_current(syn: SynapseSpec, v_pre: float, v_post: float, activation: float) -> float:
    """Current into the postsynaptic membrane, uA/cm^2 (positive depolarizes).

    ``v_pre`` only matters for the activation dynamics; the instantaneous
    current depends on the activation and the postsynaptic driving force.
    """
    if not 0.0 <= activation <= 1.0:
        raise ValueError("activation must lie in [0, 1]")
    return syn.g_syn * activation * (syn.e_syn - v_post)


@dataclass(frozen=True)
class SimulationResult:
    t: np.ndarray  # (n_steps + 1,)
    states: np.ndarray  # (n_steps + 1, dim)
    i_ext: np.ndarray  # (n_steps + 1, n_neurons) programmed current at each grid time
    layout: StateLayout
    neuron_ids: tuple[str, ...]
    stimulus: StimulusProgram
    config: SimConfig

    @property
    def dt(self) -> float:
        return self.config.dt

    @property
    def seed(self) -> int:
        return self.config.seed

    def v(self, nid: str) -> np.ndarray:
        return self.states[:, self.layout.v_index[nid]]

    def gate(self, nid: str, name: str) -> np.ndarray:
        return self.states[:, self.layout.gate_index[nid][name]]

    def synapse_activation(self, k: int) -> np.ndarray:
        return self.states[:, self.layout.synapse_index[k]]

    @property
    def voltages(self) -> np.ndarray:
        """(n_steps + 1, n_neurons) voltage matrix in neuron order."""
        return self.states[:, [self.layout.v_index[i] for i in self.neuron_ids]]

    def write_csv(self, path: str | Path) -> None:
        """One row per (step, neuron): ``t,neuron_id,v,i_ext``."""
        volts = self.voltages
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "neuron_id", "v", "i_ext"])
            for n, t in enumerate(self.t):
                for k, nid in enumerate(self.neuron_ids):
                    w.writerow([f"{t:.6g}", nid, repr(float(volts[n, k])), repr(float(self.i_ext[n, k]))])


def programmed_current(stimulus: StimulusProgram, ids, dt: float, n_steps: int) -> np.ndarray:
    """Pulse current sampled at the grid times t_n = n*dt, shape (n_steps + 1, n)."""
    t = np.arange(n_steps + 1) * dt
    out = np.zeros((n_steps + 1, len(ids)))
    # a grid time counts as inside a pulse if it lies in [start, end) up to rounding
    eps = 1e-9 * dt
    for k, nid in enumerate(ids):
        for p in stimulus.pulses.get(nid, ()):
            out[(t + eps >= p.start) & (t + eps < p.end), k] += p.amplitude
    return out


def noise_current(circuit: CircuitSpec, dt: float, n_steps: int, seed: int) -> np.ndarray:
    amps = np.array([n.noise_amplitude for n in circuit.neurons])
    if not np.any(amps > 0):
        return np.zeros((n_steps, len(amps)))
    rng = np.random.default_rng(seed)
    return rng.standard_normal((n_steps, len(amps))) * (amps / np.sqrt(dt))


def simulate(
    circuit: CircuitSpec,
    stimulus: StimulusProgram | None = None,
    config: SimConfig | None = None,
    initial_state: np.ndarray | None = None,
) -> SimulationResult:
    """Integrate the circuit with fixed-step RK4.

    Starts from every neuron's resting equilibrium unless ``initial_state``
    is given.  Membrane noise is a per-step constant current with standard
    deviation ``noise_amplitude / sqrt(dt)``, drawn from ``config.seed``.
    """
    stimulus = stimulus or StimulusProgram()
    config = config or SimConfig()
    unknown = set(stimulus.pulses) - set(circuit.ids)
    if unknown:
        raise CircuitError(f"stimulus targets unknown neurons {sorted(unknown)}")
    comp = compile_circuit(circuit)
    n_steps = config.n_steps
    if initial_state is None:
        y0 = network_rest(circuit)
    else:
        y0 = np.asarray(initial_state, float)
        if y0.shape != (comp.layout.dim,):
            raise CircuitError(f"initial state must have shape ({comp.layout.dim},)")
    i_prog = programmed_current(stimulus, circuit.ids, config.dt, n_steps)
    i_inj = i_prog[:-1] + noise_current(circuit, config.dt, n_steps, config.seed)
    states, failed = comp.integrate(y0, config.dt, i_inj)
    if failed >= 0:
        bad = ~np.isfinite(states[-1])
        nid = _owner(comp, int(np.flatnonzero(bad)[0]))
        raise IntegrationDiverged(nid, (failed + 1) * config.dt)
    return SimulationResult(
        t=np.arange(n_steps + 1) * config.dt,
        states=states,
        i_ext=i_prog,
        layout=comp.layout,
        neuron_ids=tuple(circuit.ids),
        stimulus=stimulus,
        config=config,
    )


def _owner(comp: CompiledCircuit, j: int) -> str:
    lay = comp.layout
    for nid, vi in lay.v_index.items():
        if vi == j or j in lay.gate_index[nid].values():
            return nid
    k = lay.synapse_index.index(j)
    return comp.circuit.synapses[k].post


@functools.lru_cache(maxsize=64)
def compile_circuit(circuit: CircuitSpec) -> CompiledCircuit:
    return CompiledCircuit(circuit)


@functools.lru_cache(maxsize=256)
def _rest_cached(neuron: NeuronSpec) -> tuple[float, ...]:
    single = CircuitSpec((neuron,))
    comp = compile_circuit(single)
    y0 = comp.steady_state_at({neuron.id: RELAX_START_V})
    dt = 0.01
    n_steps = int(round(RELAX_DURATION / dt))
    states, failed = comp.integrate(y0, dt, np.zeros((n_steps, 1)))
    if failed >= 0:
        raise NonRestingModel(f"neuron {neuron.id}: relaxation diverged")
    y = states[-1]
    resid = abs(comp.derivative(y)[comp.layout.v_index[neuron.id]])
    if not resid < REST_RESIDUAL:
        raise NonRestingModel(
            f"neuron {neuron.id}: no equilibrium after {RELAX_DURATION:g} ms (|dV/dt|={resid:.3g} mV/ms)"
        )
    return tuple(float(x) for x in y)


def resting_state(neuron: NeuronSpec) -> np.ndarray:
    """Equilibrium reached by relaxing 500 ms from -65 mV with zero input.

    Returns [V, gates...] in the neuron's own layout order.  Raises
    ``NonRestingModel`` when the residual |dV/dt| stays above 1e-3 mV/ms,
    e.g. for tonically firing parameter sets.
    """
    return np.array(_rest_cached(neuron))


def resting_voltage(neuron: NeuronSpec) -> float:
    return float(_rest_cached(neuron)[0])


def network_rest(circuit: CircuitSpec) -> np.ndarray:
    """Each neuron at its isolated equilibrium, synapses at their steady state."""
    comp = compile_circuit(circuit)
    y = np.empty(comp.layout.dim)
    volts = {}
    for nrn in circuit.neurons:
        own = resting_state(nrn)
        base = comp.layout.v_index[nrn.id]
        y[base : base + len(own)] = own
        volts[nrn.id] = own[0]
    for s, j in zip(circuit.synapses, comp.layout.synapse_index):
        y[j] = synapse_target(s, volts[s.pre])
    return y
