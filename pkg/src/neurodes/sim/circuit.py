"""Declarative circuit description: neurons, ion channels, synapses, stimuli.

Units follow the usual conductance-based conventions: mV, ms, mS/cm^2,
uA/cm^2 and uF/cm^2.  Every numeric parameter comes from the circuit
document; the loader only validates it.
"""

from __future__ import annotations

import contextlib
import copy
import enum
import functools
import json
import math
from importlib import resources
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np


class CircuitError(ValueError):
    """Raised when a circuit, stimulus or config fails validation."""


class BehaviorClass(str, enum.Enum):
    LIF = "LIF"
    EXCITABLE = "EXCITABLE"
    REBOUND_SPIKING = "REBOUND_SPIKING"
    SPIKING_REBOUND_BURSTING = "SPIKING_REBOUND_BURSTING"


class SynapseKind(str, enum.Enum):
    EXCITATORY = "EXCITATORY"
    INHIBITORY = "INHIBITORY"


class SynapseSpeed(str, enum.Enum):
    FAST = "FAST"
    SLOW = "SLOW"


# Channels a conductance-based neuron needs for its declared behavior.
REQUIRED_CHANNELS = {
    BehaviorClass.EXCITABLE: frozenset({"Na", "K"}),
    BehaviorClass.REBOUND_SPIKING: frozenset({"Na", "K"}),
    BehaviorClass.SPIKING_REBOUND_BURSTING: frozenset({"Na", "K", "CaT", "KS"}),
}
BURST_CHANNELS = frozenset({"CaT", "KS"})

# Rate-function shapes for the alpha/beta gate formalism.
RATE_FORMS = ("exp", "sigmoid", "linexp")

# Voltage range over which gate time constants must stay positive.
TAU_CHECK_RANGE = (-120.0, 60.0)

# Excitatory reversal must sit above the spike-initiation band, inhibitory
# reversal below the resting band.
EXCITATORY_E_MIN = -40.0
INHIBITORY_E_MAX = -70.0


def _check_keys(obj: Mapping[str, Any], allowed: Iterable[str], where: str) -> None:
    if not isinstance(obj, Mapping):
        raise CircuitError(f"{where}: expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(allowed)
    if unknown:
        raise CircuitError(f"{where}: unknown keys {sorted(unknown)}")


@contextlib.contextmanager
def _context(where: str):
    """Prefix validation errors raised inside the block with the document path."""
    try:
        yield
    except CircuitError as exc:
        if str(exc).startswith(where):
            raise
        raise CircuitError(f"{where}: {exc}") from None


def _num(obj: Mapping[str, Any], key: str, where: str, default: Any = None) -> float:
    if key not in obj:
        if default is None:
            raise CircuitError(f"{where}: missing '{key}'")
        return float(default)
    val = obj[key]
    if isinstance(val, bool) or not isinstance(val, (int, float)):
        raise CircuitError(f"{where}: '{key}' must be a number")
    if not math.isfinite(val):
        raise CircuitError(f"{where}: '{key}' must be finite")
    return float(val)


@dataclass(frozen=True)
class RateFunction:
    """One HH-style rate: exp, sigmoid or linear-exponential in V (1/ms)."""

    form: str
    scale: float
    v_half: float
    slope: float

    def __call__(self, v):
        x = (np.asarray(v, dtype=float) - self.v_half) / self.slope
        if self.form == "exp":
            return self.scale * np.exp(x)
        if self.form == "sigmoid":
            return self.scale / (1.0 + np.exp(x))
        # linexp: scale*(v - v_half)/(1 - exp(-x)); limit scale*slope at x=0
        x = np.where(np.abs(x) < 1e-7, 1e-7, x)
        return self.scale * self.slope * x / (1.0 - np.exp(-x))

    def to_dict(self) -> dict:
        return {"form": self.form, "scale": self.scale, "v_half": self.v_half, "slope": self.slope}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], where: str) -> "RateFunction":
        _check_keys(d, ("form", "scale", "v_half", "slope"), where)
        form = d.get("form")
        if form not in RATE_FORMS:
            raise CircuitError(f"{where}: form must be one of {RATE_FORMS}")
        slope = _num(d, "slope", where)
        if slope == 0:
            raise CircuitError(f"{where}: slope must be nonzero")
        return cls(form, _num(d, "scale", where), _num(d, "v_half", where), slope)


@dataclass(frozen=True)
class GateKinetics:
    """Kinetics of one gating variable.

    Two parameterisations are supported.  ``rates`` uses opening/closing
    rates (alpha, beta).  ``sigmoid`` uses a Boltzmann steady state
    ``1/(1+exp(-(V-v_half)/slope))`` and a time constant
    ``tau_base + tau_amp / (exp((V-tau_v)/tau_s1) + exp(-(V-tau_v)/tau_s2))``.
    A negative slope gives an inactivating gate.
    """

    kind: str
    alpha: RateFunction | None = None
    beta: RateFunction | None = None
    v_half: float = 0.0
    slope: float = 1.0
    tau_base: float = 1.0
    tau_amp: float = 0.0
    tau_v: float = 0.0
    tau_s1: float = 1.0
    tau_s2: float = 1.0

    def steady_state(self, v):
        if self.kind == "rates":
            a, b = self.alpha(v), self.beta(v)
            return a / (a + b)
        return 1.0 / (1.0 + np.exp(-(np.asarray(v, dtype=float) - self.v_half) / self.slope))

    def tau(self, v):
        if self.kind == "rates":
            return 1.0 / (self.alpha(v) + self.beta(v))
        v = np.asarray(v, dtype=float)
        return self.tau_base + self.tau_amp / (
            np.exp((v - self.tau_v) / self.tau_s1) + np.exp(-(v - self.tau_v) / self.tau_s2)
        )

    def to_dict(self) -> dict:
        if self.kind == "rates":
            return {"kind": "rates", "alpha": self.alpha.to_dict(), "beta": self.beta.to_dict()}
        return {
            "kind": "sigmoid",
            "v_half": self.v_half,
            "slope": self.slope,
            "tau_base": self.tau_base,
            "tau_amp": self.tau_amp,
            "tau_v": self.tau_v,
            "tau_s1": self.tau_s1,
            "tau_s2": self.tau_s2,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], where: str) -> "GateKinetics":
        if not isinstance(d, Mapping):
            raise CircuitError(f"{where}: expected an object")
        kind = d.get("kind")
        if kind == "rates":
            _check_keys(d, ("kind", "alpha", "beta"), where)
            if "alpha" not in d or "beta" not in d:
                raise CircuitError(f"{where}: rate kinetics need 'alpha' and 'beta'")
            gate = cls(
                "rates",
                alpha=RateFunction.from_dict(d["alpha"], f"{where}.alpha"),
                beta=RateFunction.from_dict(d["beta"], f"{where}.beta"),
            )
        elif kind == "sigmoid":
            keys = ("v_half", "slope", "tau_base", "tau_amp", "tau_v", "tau_s1", "tau_s2")
            _check_keys(d, ("kind",) + keys, where)
            vals = {
                "v_half": _num(d, "v_half", where),
                "slope": _num(d, "slope", where),
                "tau_base": _num(d, "tau_base", where),
                "tau_amp": _num(d, "tau_amp", where, 0.0),
                "tau_v": _num(d, "tau_v", where, 0.0),
                "tau_s1": _num(d, "tau_s1", where, 1.0),
                "tau_s2": _num(d, "tau_s2", where, 1.0),
            }
            if vals["slope"] == 0 or vals["tau_s1"] == 0 or vals["tau_s2"] == 0:
                raise CircuitError(f"{where}: slopes must be nonzero")
            gate = cls("sigmoid", **vals)
        else:
            raise CircuitError(f"{where}: kinetics kind must be 'rates' or 'sigmoid'")
        gate._check_tau(where)
        return gate

    def _check_tau(self, where: str) -> None:
        v = np.linspace(*TAU_CHECK_RANGE, 721)
        with np.errstate(over="ignore"):
            tau = self.tau(v)
        if not np.all(np.isfinite(tau)) or np.any(tau <= 0):
            raise CircuitError(f"{where}: time constant must be positive on {TAU_CHECK_RANGE} mV")


@dataclass(frozen=True)
class IonChannel:
    """Conductance ``g_max * m**p * h**q`` in series with battery ``e_rev``."""

    name: str
    g_max: float
    e_rev: float
    activation_exponent: int = 0
    inactivation_exponent: int = 0
    activation: GateKinetics | None = None
    inactivation: GateKinetics | None = None

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"name": self.name, "g_max": self.g_max, "e_rev": self.e_rev}
        if self.activation is not None:
            d["activation"] = {"exponent": self.activation_exponent, **self.activation.to_dict()}
        if self.inactivation is not None:
            d["inactivation"] = {"exponent": self.inactivation_exponent, **self.inactivation.to_dict()}
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], where: str) -> "IonChannel":
        _check_keys(d, ("name", "g_max", "e_rev", "activation", "inactivation"), where)
        name = d.get("name")
        if not isinstance(name, str) or not name:
            raise CircuitError(f"{where}: channel needs a non-empty 'name'")
        g_max = _num(d, "g_max", where)
        if g_max < 0:
            raise CircuitError(f"{where}: g_max must be >= 0")
        gates: dict[str, tuple[int, GateKinetics | None]] = {}
        for role in ("activation", "inactivation"):
            spec = d.get(role)
            if spec is None:
                gates[role] = (0, None)
                continue
            if not isinstance(spec, Mapping):
                raise CircuitError(f"{where}.{role}: expected an object")
            exponent = spec.get("exponent")
            if isinstance(exponent, bool) or not isinstance(exponent, int) or exponent < 0:
                raise CircuitError(f"{where}.{role}: exponent must be a nonnegative integer")
            kin = {k: v for k, v in spec.items() if k != "exponent"}
            gates[role] = (exponent, GateKinetics.from_dict(kin, f"{where}.{role}"))
        return cls(
            name,
            g_max,
            _num(d, "e_rev", where),
            gates["activation"][0],
            gates["inactivation"][0],
            gates["activation"][1],
            gates["inactivation"][1],
        )


@dataclass(frozen=True)
class NeuronSpec:
    id: str
    C: float
    g_leak: float
    e_leak: float
    channels: tuple[IonChannel, ...] = ()
    noise_amplitude: float = 0.0
    behavior_class: BehaviorClass | None = None

    def __post_init__(self):
        if not self.C > 0:
            raise CircuitError(f"neuron {self.id}: capacitance must be > 0")
        if self.g_leak < 0:
            raise CircuitError(f"neuron {self.id}: g_leak must be >= 0")
        if self.noise_amplitude < 0:
            raise CircuitError(f"neuron {self.id}: noise_amplitude must be >= 0")
        names = [c.name for c in self.channels]
        if len(set(names)) != len(names):
            raise CircuitError(f"neuron {self.id}: duplicate channel names")
        cls = self.behavior_class
        if cls is BehaviorClass.LIF:
            raise CircuitError(
                f"neuron {self.id}: LIF is not conductance-based; use LIFSpec and simulate_lif"
            )
        if cls is not None:
            have = set(names)
            missing = REQUIRED_CHANNELS[cls] - have
            if missing:
                raise CircuitError(
                    f"neuron {self.id}: class {cls.value} requires channels {sorted(missing)}"
                )
            if cls is not BehaviorClass.SPIKING_REBOUND_BURSTING and have & BURST_CHANNELS:
                raise CircuitError(
                    f"neuron {self.id}: channels {sorted(have & BURST_CHANNELS)} imply "
                    "SPIKING_REBOUND_BURSTING"
                )

    def to_dict(self) -> dict:
        d = {
            "id": self.id,
            "C": self.C,
            "g_leak": self.g_leak,
            "e_leak": self.e_leak,
            "noise_amplitude": self.noise_amplitude,
            "channels": [c.to_dict() for c in self.channels],
        }
        if self.behavior_class is not None:
            d["class"] = self.behavior_class.value
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], where: str = "neuron") -> "NeuronSpec":
        _check_keys(d, ("id", "class", "C", "g_leak", "e_leak", "noise_amplitude", "channels"), where)
        nid = d.get("id")
        if isinstance(nid, bool) or not isinstance(nid, (str, int)):
            raise CircuitError(f"{where}: 'id' must be a string or integer")
        nid = str(nid)
        behavior = d.get("class")
        if behavior is not None:
            try:
                behavior = BehaviorClass(behavior)
            except ValueError:
                raise CircuitError(f"{where}: unknown class {behavior!r}") from None
        chans = d.get("channels", [])
        if not isinstance(chans, list):
            raise CircuitError(f"{where}: 'channels' must be a list")
        with _context(where):
            return cls(
                nid,
                _num(d, "C", where),
                _num(d, "g_leak", where),
                _num(d, "e_leak", where),
                tuple(IonChannel.from_dict(c, f"{where}.channels[{i}]") for i, c in enumerate(chans)),
                _num(d, "noise_amplitude", where, 0.0),
                behavior,
            )


@dataclass(frozen=True)
class LIFSpec:
    alpha: float
    theta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.theta > 0):
            raise CircuitError("LIF alpha and theta must be > 0")


@dataclass(frozen=True)
class SynapseSpec:
    """First-order synapse; activation relaxes toward a sigmoid of V_pre."""

    pre: str
    post: str
    kind: SynapseKind
    speed: SynapseSpeed
    g_syn: float
    e_syn: float
    v_half: float
    slope: float
    tau_rise: float
    tau_decay: float

    def __post_init__(self):
        if self.pre == self.post:
            raise CircuitError(f"synapse {self.pre}->{self.post}: self-synapses are not allowed")
        if self.g_syn < 0:
            raise CircuitError(f"synapse {self.pre}->{self.post}: g_syn must be >= 0")
        if self.slope <= 0:
            raise CircuitError(f"synapse {self.pre}->{self.post}: slope must be > 0")
        if not (self.tau_rise > 0 and self.tau_decay > 0):
            raise CircuitError(f"synapse {self.pre}->{self.post}: time constants must be > 0")
        if self.kind is SynapseKind.EXCITATORY and not self.e_syn > EXCITATORY_E_MIN:
            raise CircuitError(
                f"synapse {self.pre}->{self.post}: excitatory e_syn must exceed {EXCITATORY_E_MIN} mV"
            )
        if self.kind is SynapseKind.INHIBITORY and not self.e_syn < INHIBITORY_E_MAX:
            raise CircuitError(
                f"synapse {self.pre}->{self.post}: inhibitory e_syn must be below {INHIBITORY_E_MAX} mV"
            )

    def to_dict(self) -> dict:
        return {
            "pre": self.pre,
            "post": self.post,
            "kind": self.kind.value,
            "speed": self.speed.value,
            "g_syn": self.g_syn,
            "e_syn": self.e_syn,
            "v_half": self.v_half,
            "slope": self.slope,
            "tau_rise": self.tau_rise,
            "tau_decay": self.tau_decay,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any], where: str = "synapse") -> "SynapseSpec":
        """Parse a synapse entry; omitted parameters come from the kind/speed defaults."""
        keys = ("pre", "post", "kind", "speed", "g_syn", "e_syn", "v_half", "slope", "tau_rise", "tau_decay")
        _check_keys(d, keys, where)
        for k in ("pre", "post", "kind"):
            if k not in d:
                raise CircuitError(f"{where}: missing '{k}'")
        try:
            kind = SynapseKind(d["kind"])
            speed = SynapseSpeed(d.get("speed", "FAST"))
        except ValueError as exc:
            raise CircuitError(f"{where}: {exc}") from None
        params = {**synapse_defaults(kind, speed), **{k: d[k] for k in keys[4:] if k in d}}
        with _context(where):
            return cls(
                str(d["pre"]),
                str(d["post"]),
                kind,
                speed,
                *(_num(params, k, where) for k in keys[4:]),
            )


@functools.lru_cache(maxsize=None)
def _profile(name: str) -> dict:
    return json.loads(resources.files("neurodes.profiles").joinpath(name).read_text())


def load_profile(name: str) -> dict:
    """Return a fresh copy of a bundled JSON profile (e.g. ``hh.json``)."""
    return copy.deepcopy(_profile(name))


def synapse_defaults(kind: SynapseKind | str, speed: SynapseSpeed | str) -> dict[str, float]:
    return dict(_profile("synapses.json")["defaults"][SynapseKind(kind).value][SynapseSpeed(speed).value])


@dataclass(frozen=True)
class Pulse:
    start: float
    duration: float
    amplitude: float

    @property
    def end(self) -> float:
        return self.start + self.duration


@dataclass(frozen=True)
class StimulusProgram:
    """Rectangular current pulses per neuron; sign gives excitatory (+) / inhibitory (-)."""

    pulses: Mapping[str, tuple[Pulse, ...]] = field(default_factory=dict)

    def __post_init__(self):
        for nid, seq in self.pulses.items():
            ordered = sorted(seq, key=lambda p: p.start)
            for p in ordered:
                if not p.duration > 0:
                    raise CircuitError(f"stimulus for {nid}: durations must be > 0")
            for a, b in zip(ordered, ordered[1:]):
                if b.start < a.end:
                    raise CircuitError(f"stimulus for {nid}: pulses overlap at t={b.start} ms")
            object.__setattr__(self, "pulses", {**self.pulses, nid: tuple(ordered)})

    @classmethod
    def from_list(cls, entries: Sequence[Mapping[str, Any]]) -> "StimulusProgram":
        pulses: dict[str, list[Pulse]] = {}
        for i, e in enumerate(entries):
            where = f"stimuli[{i}]"
            _check_keys(e, ("neuron", "start", "duration", "amplitude"), where)
            if "neuron" not in e:
                raise CircuitError(f"{where}: missing 'neuron'")
            pulses.setdefault(str(e["neuron"]), []).append(
                Pulse(_num(e, "start", where), _num(e, "duration", where), _num(e, "amplitude", where))
            )
        return cls({k: tuple(v) for k, v in pulses.items()})

    def to_list(self) -> list[dict]:
        return [
            {"neuron": nid, "start": p.start, "duration": p.duration, "amplitude": p.amplitude}
            for nid in sorted(self.pulses)
            for p in self.pulses[nid]
        ]

    def current_at(self, nid: str, t: float) -> float:
        for p in self.pulses.get(nid, ()):
            if p.start <= t < p.end:
                return p.amplitude
        return 0.0

    def with_pulse(self, nid: str, pulse: Pulse) -> "StimulusProgram":
        return StimulusProgram({**self.pulses, nid: self.pulses.get(nid, ()) + (pulse,)})


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.01
    t_end: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if not self.dt > 0:
            raise CircuitError("config: dt must be > 0")
        if not self.t_end >= self.dt:
            raise CircuitError("config: t_end must be >= dt")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise CircuitError("config: seed must be a nonnegative integer")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))

    def to_dict(self) -> dict:
        return {"dt": self.dt, "t_end": self.t_end, "seed": self.seed}

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "SimConfig":
        _check_keys(d, ("dt", "t_end", "seed"), "config")
        seed = d.get("seed", 0)
        return cls(_num(d, "dt", "config", 0.01), _num(d, "t_end", "config", 100.0), seed)


@dataclass(frozen=True)
class CircuitSpec:
    neurons: tuple[NeuronSpec, ...]
    synapses: tuple[SynapseSpec, ...] = ()

    def __post_init__(self):
        if not self.neurons:
            raise CircuitError("circuit has no neurons")
        ids = [n.id for n in self.neurons]
        if len(set(ids)) != len(ids):
            raise CircuitError("duplicate neuron ids")
        known = set(ids)
        for s in self.synapses:
            if s.pre not in known or s.post not in known:
                raise CircuitError(f"synapse {s.pre}->{s.post}: unknown endpoint")

    @property
    def ids(self) -> list[str]:
        return [n.id for n in self.neurons]

    def neuron(self, nid: str) -> NeuronSpec:
        for n in self.neurons:
            if n.id == nid:
                return n
        raise KeyError(nid)

    def to_dict(self) -> dict:
        return {
            "neurons": [n.to_dict() for n in self.neurons],
            "synapses": [s.to_dict() for s in self.synapses],
        }


@dataclass(frozen=True)
class Bundle:
    """Everything one simulation file carries."""

    circuit: CircuitSpec
    stimulus: StimulusProgram
    config: SimConfig

    def to_dict(self) -> dict:
        return {
            **self.circuit.to_dict(),
            "stimuli": self.stimulus.to_list(),
            "config": self.config.to_dict(),
        }


def parse_bundle(doc: Mapping[str, Any]) -> Bundle:
    _check_keys(doc, ("neurons", "synapses", "stimuli", "config"), "document")
    neurons = doc.get("neurons")
    if not isinstance(neurons, list):
        raise CircuitError("document: 'neurons' must be a list")
    synapses = doc.get("synapses", [])
    stimuli = doc.get("stimuli", [])
    if not isinstance(synapses, list) or not isinstance(stimuli, list):
        raise CircuitError("document: 'synapses' and 'stimuli' must be lists")
    circuit = CircuitSpec(
        tuple(NeuronSpec.from_dict(n, f"neurons[{i}]") for i, n in enumerate(neurons)),
        tuple(SynapseSpec.from_dict(s, f"synapses[{i}]") for i, s in enumerate(synapses)),
    )
    stim = StimulusProgram.from_list(stimuli)
    unknown = set(stim.pulses) - set(circuit.ids)
    if unknown:
        raise CircuitError(f"stimuli: unknown neurons {sorted(unknown)}")
    return Bundle(circuit, stim, SimConfig.from_dict(doc.get("config", {})))


def load_bundle(path: str | Path) -> Bundle:
    """Read a circuit+stimulus JSON document.

    JSON syntax errors surface as ``json.JSONDecodeError`` (which carries
    line and column); semantic errors as ``CircuitError``.
    """
    with open(path) as fh:
        doc = json.load(fh)
    return parse_bundle(doc)
