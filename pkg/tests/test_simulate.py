import json
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import oracles
from neurodes.library import burster_neuron, excitability_bundle, hh_neuron, profile_synapse, rebound_bundles
from neurodes.events import detect_spikes
from neurodes.sim.circuit import (
    CircuitError,
    CircuitSpec,
    NeuronSpec,
    Pulse,
    SimConfig,
    StimulusProgram,
    SynapseKind,
    SynapseSpec,
    SynapseSpeed,
    parse_bundle,
    synapse_defaults,
)
from neurodes.sim.simulate import (
    IntegrationDiverged,
    NonRestingModel,
    resting_state,
    resting_voltage,
    simulate,
    synaptic_current,
    synapse_target,
)


def one(neuron):
    return CircuitSpec((neuron,))


def pulse_run(amp, dur=2.0, t_end=30.0, dt=0.01):
    c = one(hh_neuron(1))
    return simulate(c, StimulusProgram({"1": (Pulse(5.0, dur, amp),)}), SimConfig(dt, t_end, 0))


# -- validation ----------------------------------------------------------------

def test_bad_capacitance():
    with pytest.raises(CircuitError, match="capacitance"):
        NeuronSpec("1", 0.0, 0.1, -60.0)


def test_channel_class_consistency():
    d = hh_neuron(1).to_dict()
    d["class"] = "SPIKING_REBOUND_BURSTING"
    with pytest.raises(CircuitError, match="requires channels"):
        NeuronSpec.from_dict(d)


def test_unknown_keys_rejected():
    b = excitability_bundle().to_dict()
    b["extra"] = 1
    with pytest.raises(CircuitError, match="unknown"):
        parse_bundle(b)


def test_negative_gmax_names_location():
    b = excitability_bundle().to_dict()
    b["neurons"][0]["channels"][1]["g_max"] = -1
    with pytest.raises(CircuitError, match=r"neurons\[0\]\.channels\[1\]"):
        parse_bundle(b)


def test_synapse_validation():
    with pytest.raises(CircuitError, match="self-synapse"):
        profile_synapse(1, 1, "INHIBITORY", "wta")
    with pytest.raises(CircuitError):
        SynapseSpec("1", "2", SynapseKind.INHIBITORY, SynapseSpeed.FAST, 1.0, 0.0, -50, 1, 1, 1)
    with pytest.raises(CircuitError):
        SynapseSpec("1", "2", SynapseKind.EXCITATORY, SynapseSpeed.FAST, 1.0, -80.0, -50, 1, 1, 1)


def test_synapse_defaults_fill_missing():
    s = SynapseSpec.from_dict({"pre": "1", "post": "2", "kind": "INHIBITORY", "speed": "SLOW"})
    d = synapse_defaults("INHIBITORY", "SLOW")
    assert s.tau_decay == d["tau_decay"] and s.g_syn == d["g_syn"]


def test_overlapping_pulses_rejected():
    with pytest.raises(CircuitError):
        StimulusProgram({"1": (Pulse(0, 5, 1), Pulse(4, 5, 1))})


def test_config_validation():
    with pytest.raises(CircuitError):
        SimConfig(0.0, 10.0, 0)
    with pytest.raises(CircuitError):
        SimConfig(0.1, 0.01, 0)


def test_stimulus_unknown_neuron():
    with pytest.raises(CircuitError):
        simulate(one(hh_neuron(1)), StimulusProgram({"9": (Pulse(0, 1, 1),)}), SimConfig(0.01, 1.0, 0))


def test_bundle_json_roundtrip():
    b = excitability_bundle()
    assert parse_bundle(json.loads(json.dumps(b.to_dict()))) == b


# -- synaptic current ------------------------------------------------------------

def test_synaptic_current_arithmetic():
    syn = SynapseSpec("1", "2", SynapseKind.INHIBITORY, SynapseSpeed.FAST, 1.0, -80.0, -50.0, 2.0, 1.0, 5.0)
    assert synaptic_current(syn, -65.0, -65.0, 1.0) == -15.0
    assert synaptic_current(syn, 20.0, -65.0, 0.0) == 0.0
    assert synaptic_current(syn, 20.0, -80.0, 0.7) == 0.0
    with pytest.raises(ValueError):
        synaptic_current(syn, 0.0, 0.0, 1.5)


@given(st.floats(-100, 50), st.floats(-100, 50), st.floats(0, 1), st.floats(0, 5))
def test_synaptic_current_formula(v_pre, v_post, a, g):
    syn = SynapseSpec("1", "2", SynapseKind.EXCITATORY, SynapseSpeed.FAST, g, 0.0, -20.0, 2.0, 1.0, 5.0)
    assert math.isclose(synaptic_current(syn, v_pre, v_post, a), g * a * (0.0 - v_post), abs_tol=1e-12)


def test_synapse_target_sigmoid():
    syn = profile_synapse(1, 2, "INHIBITORY", "wta")
    assert synapse_target(syn, syn.v_half) == pytest.approx(0.5)
    assert synapse_target(syn, 30.0) > 0.99


# -- rest ------------------------------------------------------------------------

def test_hh_rest_in_band_and_matches_oracle():
    v = resting_voltage(hh_neuron(1))
    assert -70.0 <= v <= -60.0
    assert v == pytest.approx(oracles.hh_rest()[0], abs=1e-3)


def test_leak_only_rest_is_reversal():
    n = NeuronSpec("1", 1.0, 0.1, -61.5)
    assert resting_voltage(n) == pytest.approx(-61.5, abs=1e-9)


def test_burster_rest_close_to_hh():
    assert abs(resting_voltage(burster_neuron(1)) - resting_voltage(hh_neuron(1))) < 2.0


def test_tonic_neuron_has_no_rest():
    d = hh_neuron(1).to_dict()
    d["e_leak"] = -30.0  # strong depolarizing leak makes the cell fire tonically
    with pytest.raises(NonRestingModel):
        resting_state(NeuronSpec.from_dict(d))


@pytest.mark.parametrize("make", [hh_neuron, burster_neuron])
def test_rest_is_invariant(make):
    r = simulate(one(make(1)), None, SimConfig(0.01, 100.0, 0))
    v = r.v("1")
    assert np.max(np.abs(v - v[0])) < 0.5


# -- excitability ----------------------------------------------------------------

def test_subthreshold_and_spiking_pulses():
    b = excitability_bundle()
    r = simulate(b.circuit, b.stimulus, b.config)
    v = r.v("1")
    first = v[: int(30 / 0.01)]
    second = v[int(30 / 0.01):]
    assert first.max() < 0.0
    assert oracles.upward_crossings(list(second)) == 1
    assert 25.0 <= second.max() <= 45.0
    spikes = detect_spikes(v, 0.01)
    assert len(spikes) == 1 and 39.0 <= spikes[0] <= 42.0


def test_hh_matches_scalar_oracle():
    b = excitability_bundle()
    r = simulate(b.circuit, b.stimulus, b.config)
    ref = np.array(oracles.hh_voltage([(5.0, 2.0, 3.75), (35.0, 2.0, 3.95)], 60.0))
    assert np.max(np.abs(r.v("1") - ref)) < 1e-3


def test_rk4_fourth_order():
    b = excitability_bundle()

    def v_at(dt, t):
        r = simulate(b.circuit, b.stimulus, SimConfig(dt, 45.0, 0))
        return r.v("1")[int(round(t / dt))]

    for t in (39.0, 40.0):
        ref = v_at(0.0025, t)
        ratio = abs(v_at(0.04, t) - ref) / abs(v_at(0.02, t) - ref)
        assert ratio >= 8.0


def test_threshold_single_switch():
    spikes = lambda a: len(detect_spikes(pulse_run(a).v("1"), 0.01)) > 0  # noqa: E731
    lo, hi = 3.75, 3.95
    assert not spikes(lo) and spikes(hi)
    for _ in range(8):
        mid = 0.5 * (lo + hi)
        if spikes(mid):
            hi = mid
        else:
            lo = mid
    # monotone on a grid spanning the bracket
    grid = np.linspace(3.75, 3.95, 9)
    pattern = [spikes(a) for a in grid]
    assert pattern == sorted(pattern)
    assert 3.75 <= lo < hi <= 3.95


# -- rebound ---------------------------------------------------------------------

def test_burster_rebound_and_depolarization():
    dep, hyp = rebound_bundles()
    r = simulate(dep.circuit, dep.stimulus, dep.config)
    assert len(detect_spikes(r.v("1"), 0.01)) >= 1
    r = simulate(hyp.circuit, hyp.stimulus, hyp.config)
    sp = detect_spikes(r.v("1"), 0.01)
    release = 220.0
    after = sp[(sp > release) & (sp <= release + 100.0)]
    assert len(after) >= 2
    assert np.all(np.diff(after) <= 30.0)
    assert not np.any(sp < release)


# -- determinism, noise, divergence ----------------------------------------------

def test_deterministic_with_noise():
    c = one(hh_neuron(1, noise=0.5))
    a = simulate(c, None, SimConfig(0.01, 50.0, 7))
    b = simulate(c, None, SimConfig(0.01, 50.0, 7))
    d = simulate(c, None, SimConfig(0.01, 50.0, 8))
    assert np.array_equal(a.states, b.states)
    assert not np.array_equal(a.states, d.states)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 3.0), st.integers(0, 2**31))
def test_noise_free_runs_ignore_seed(amp, seed):
    c = one(hh_neuron(1))
    stim = StimulusProgram({"1": (Pulse(1.0, 1.0, amp),)})
    a = simulate(c, stim, SimConfig(0.02, 10.0, seed))
    b = simulate(c, stim, SimConfig(0.02, 10.0, 0))
    assert np.array_equal(a.states, b.states)
    assert np.all(np.isfinite(a.states))
    assert a.t.shape[0] == a.states.shape[0] == a.i_ext.shape[0]


def test_divergence_names_neuron():
    c = one(hh_neuron(1))
    with pytest.raises(IntegrationDiverged) as exc:
        simulate(c, StimulusProgram({"1": (Pulse(0.0, 5.0, 1e6),)}), SimConfig(0.05, 5.0, 0))
    assert exc.value.neuron == "1"


def test_csv_export(tmp_path):
    b = excitability_bundle()
    r = simulate(b.circuit, b.stimulus, SimConfig(0.01, 1.0, 0))
    path = tmp_path / "t.csv"
    r.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "t,neuron_id,v,i_ext"
    assert len(lines) == 1 + 101


def test_inhibitory_synapse_hyperpolarizes():
    c = CircuitSpec((hh_neuron(1), hh_neuron(2)), (profile_synapse(1, 2, "INHIBITORY", "wta"),))
    r = simulate(c, StimulusProgram({"1": (Pulse(5.0, 2.0, 10.0),)}), SimConfig(0.01, 30.0, 0))
    assert r.v("2").min() < r.v("2")[0] - 2.0
    assert r.synapse_activation(0).max() > 0.5
