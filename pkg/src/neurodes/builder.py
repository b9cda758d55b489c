"""Construction of neuron, network and winner-take-all automata.

Neuron templates follow the behavior class: one discrete state per
threshold plus the resting state.  A synapse adds internal transitions to
its target that synchronize with events of the source neuron:

* excitatory ``pre -> post``: the target's rest->spike edge also fires on
  the source's onset events;
* inhibitory ``pre -> post``: the target's rebound edge also fires on the
  source's return-to-rest events.

External transitions of neurons the environment cannot reach are pruned
before composition.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .automata import (
    EXCITATORY,
    INHIBITORY,
    INTERNAL,
    Automaton,
    AutomatonError,
    TransitionKind,
    accessible,
    compose_all,
    has_self_loops,
)
from .sim.circuit import BehaviorClass, CircuitSpec, SynapseKind, SynapseSpeed


class BuildError(ValueError):
    pass


class UnsupportedRewrite(BuildError):
    """A synapse targets a neuron whose automaton has nothing to rewrite."""


class OutOfScope(BuildError):
    """Synapses onto spiking/rebound-bursting neurons have no construction rule."""


# ASCII event names; rho_rebound is the inhibition-triggered spike onset.
SIGMA = "sigma"
REBOUND = "rho_rebound"
ETA = "eta"
BETA = "beta"
RHO = "rho"

ONSET_SYMBOLS = (SIGMA, REBOUND, BETA)
RETURN_SYMBOLS = (ETA, RHO)

CLASS_SYMBOLS = {
    BehaviorClass.LIF: (SIGMA,),
    BehaviorClass.EXCITABLE: (SIGMA, ETA),
    BehaviorClass.REBOUND_SPIKING: (SIGMA, REBOUND, ETA),
    BehaviorClass.SPIKING_REBOUND_BURSTING: (SIGMA, BETA, ETA, RHO),
}

SYMBOL_KINDS = {
    SIGMA: EXCITATORY,
    REBOUND: INHIBITORY,
    BETA: INHIBITORY,
    ETA: INTERNAL,
    RHO: INTERNAL,
}


def symbol(base: str, nid: str | int | None = None) -> str:
    return base if nid is None else f"{base}{nid}"


def state_name(base: str, nid: str | int | None = None) -> str:
    return base if nid is None else f"{base}{nid}"


def neuron_template(cls: BehaviorClass | str, nid: str | int | None = None) -> Automaton:
    """Automaton of an isolated neuron of the given behavior class."""
    try:
        cls = BehaviorClass(cls)
    except ValueError:
        raise BuildError(f"unknown behavior class {cls!r}") from None
    i, s, b = (state_name(x, nid) for x in "isb")
    sig, reb, eta, beta, rho = (symbol(x, nid) for x in (SIGMA, REBOUND, ETA, BETA, RHO))
    if cls is BehaviorClass.LIF:
        return Automaton({i}, {sig: EXCITATORY}, {(i, sig, i)}, i)
    if cls is BehaviorClass.EXCITABLE:
        return Automaton({i, s}, {sig: EXCITATORY, eta: INTERNAL}, {(i, sig, s), (s, eta, i)}, i)
    if cls is BehaviorClass.REBOUND_SPIKING:
        return Automaton(
            {i, s},
            {sig: EXCITATORY, reb: INHIBITORY, eta: INTERNAL},
            {(i, sig, s), (i, reb, s), (s, eta, i)},
            i,
        )
    return Automaton(
        {i, s, b},
        {sig: EXCITATORY, beta: INHIBITORY, eta: INTERNAL, rho: INTERNAL},
        {(i, sig, s), (i, beta, b), (s, eta, i), (b, rho, i)},
        i,
    )


@dataclass(frozen=True)
class SynapseLink:
    pre: str
    post: str
    kind: SynapseKind
    speed: SynapseSpeed = SynapseSpeed.FAST


@dataclass(frozen=True)
class NetworkTopology:
    neurons: tuple[tuple[str, BehaviorClass], ...]
    synapses: tuple[SynapseLink, ...] = ()
    interactable: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        ids = [n for n, _ in self.neurons]
        if len(set(ids)) != len(ids):
            raise BuildError("duplicate neuron ids")
        for syn in self.synapses:
            if syn.pre == syn.post:
                raise BuildError(f"self-synapse on neuron {syn.pre}")
            if syn.pre not in ids or syn.post not in ids:
                raise BuildError(f"synapse {syn.pre}->{syn.post} has an unknown endpoint")
        if not set(self.interactable) <= set(ids):
            raise BuildError("interactable neurons must be network neurons")

    @property
    def ids(self) -> list[str]:
        return [n for n, _ in self.neurons]

    def behavior(self, nid: str) -> BehaviorClass:
        return dict(self.neurons)[nid]

    @classmethod
    def build(cls, neurons, synapses=(), interactable=()) -> "NetworkTopology":
        """Convenience constructor accepting plain tuples/strings."""
        return cls(
            tuple((str(n), BehaviorClass(c)) for n, c in neurons),
            tuple(
                s if isinstance(s, SynapseLink)
                else SynapseLink(str(s[0]), str(s[1]), SynapseKind(s[2]),
                                 SynapseSpeed(s[3]) if len(s) > 3 else SynapseSpeed.FAST)
                for s in synapses
            ),
            frozenset(str(i) for i in interactable),
        )

    @classmethod
    def from_dict(cls, d: Mapping) -> "NetworkTopology":
        unknown = set(d) - {"neurons", "synapses", "interactable"}
        if unknown:
            raise BuildError(f"topology: unknown keys {sorted(unknown)}")
        try:
            neurons = [(n["id"], n["class"]) for n in d["neurons"]]
            synapses = [
                (s["pre"], s["post"], s["kind"], s.get("speed", "FAST")) for s in d.get("synapses", [])
            ]
            return cls.build(neurons, synapses, d.get("interactable", []))
        except (KeyError, TypeError) as exc:
            raise BuildError(f"topology: malformed document ({exc})") from None
        except ValueError as exc:
            if isinstance(exc, BuildError):
                raise
            raise BuildError(f"topology: {exc}") from None

    def to_dict(self) -> dict:
        return {
            "neurons": [{"id": n, "class": c.value} for n, c in self.neurons],
            "synapses": [
                {"pre": s.pre, "post": s.post, "kind": s.kind.value, "speed": s.speed.value}
                for s in self.synapses
            ],
            "interactable": sorted(self.interactable),
        }

    @classmethod
    def from_circuit(cls, circuit: CircuitSpec, interactable: Iterable[str]) -> "NetworkTopology":
        for n in circuit.neurons:
            if n.behavior_class is None:
                raise BuildError(f"neuron {n.id} has no behavior class")
        return cls(
            tuple((n.id, n.behavior_class) for n in circuit.neurons),
            tuple(SynapseLink(s.pre, s.post, s.kind, s.speed) for s in circuit.synapses),
            frozenset(interactable),
        )


def load_topology(path: str | Path) -> NetworkTopology:
    with open(path) as fh:
        return NetworkTopology.from_dict(json.load(fh))


def _onset_events(a: Automaton, idle: str) -> set[str]:
    return {e for s, e, d in a.transitions if s == idle and d != idle}


def _return_events(a: Automaton, idle: str) -> set[str]:
    return {e for s, e, d in a.transitions if d == idle and s != idle}


def _anchor(template: Automaton, idle: str, kind: TransitionKind) -> set[str]:
    """Targets of the template's external onset edges of the given kind."""
    return {d for s, e, d in template.transitions if s == idle and d != idle and template.alphabet[e] is kind}


def apply_synapse(
    topology: NetworkTopology, automata: Mapping[str, Automaton] | None = None
) -> dict[str, Automaton]:
    """Rewrite neuron automata for the topology's synapses.

    ``automata`` defaults to the neuron templates.  External transitions of
    non-interactable neurons are pruned first; then synchronized internal
    edges are added until a fixpoint, so chains of synapses propagate the
    source events.
    """
    ids = topology.ids
    templates = {nid: neuron_template(topology.behavior(nid), nid) for nid in ids}
    current = dict(templates if automata is None else automata)
    for syn in topology.synapses:
        post_cls = topology.behavior(syn.post)
        if post_cls is BehaviorClass.LIF:
            raise UnsupportedRewrite(
                f"synapse {syn.pre}->{syn.post}: a LIF neuron has only its reset self-loop to rewrite"
            )
        if post_cls is BehaviorClass.SPIKING_REBOUND_BURSTING:
            raise OutOfScope(
                f"synapse {syn.pre}->{syn.post}: interconnection rules for spiking/rebound-bursting "
                "targets require a fast/slow timescale classification that is not modeled"
            )
    if not topology.synapses:
        return current

    idle = {nid: state_name("i", nid) for nid in ids}
    own = {nid: set(templates[nid].alphabet) for nid in ids}
    anchors = {
        nid: {
            SynapseKind.EXCITATORY: _anchor(templates[nid], idle[nid], EXCITATORY),
            SynapseKind.INHIBITORY: _anchor(templates[nid], idle[nid], INHIBITORY),
        }
        for nid in ids
    }

    for nid in ids:
        if nid not in topology.interactable:
            current[nid] = _prune_external(current[nid], own[nid])

    changed = True
    while changed:
        changed = False
        for syn in topology.synapses:
            pre, post = current[syn.pre], current[syn.post]
            if syn.kind is SynapseKind.EXCITATORY:
                events = _onset_events(pre, idle[syn.pre])
            else:
                events = _return_events(pre, idle[syn.pre])
            new = {
                (idle[syn.post], e, target)
                for e in events
                for target in anchors[syn.post][syn.kind]
            } - post.transitions
            if new:
                alphabet = {**post.alphabet, **{e: pre.alphabet[e] for _, e, _ in new}}
                current[syn.post] = Automaton(post.states, alphabet, post.transitions | new, post.initial)
                changed = True
    return current


def _prune_external(a: Automaton, own_events: set[str]) -> Automaton:
    drop = {e for e in own_events if e in a.alphabet and a.alphabet[e].is_external}
    return Automaton(
        a.states,
        {e: k for e, k in a.alphabet.items() if e not in drop},
        {t for t in a.transitions if t[1] not in drop},
        a.initial,
    )


def inputs_at_rest_only(a: Automaton) -> Automaton:
    """Drop external transitions that leave any state other than the initial one."""
    trans = {t for t in a.transitions if t[0] == a.initial or not a.alphabet[t[1]].is_external}
    return accessible(Automaton(a.states, a.alphabet, trans, a.initial))


def build_network_des(topology: NetworkTopology, *, stimulate_at_rest: bool = True) -> Automaton:
    """Compose the rewritten neuron automata and keep the accessible part.

    With ``stimulate_at_rest`` (default) the environment acts only on the
    fully resting network: external transitions out of any other composite
    state are removed.  Plain parallel composition would otherwise let a
    stimulated neuron fire again while its synaptic targets are still
    active.
    """
    rewritten = apply_synapse(topology)
    net = compose_all([rewritten[nid] for nid in topology.ids])
    return inputs_at_rest_only(net) if stimulate_at_rest else net


def local_states(topology: NetworkTopology, composite: str) -> dict[str, str]:
    """Split a composite state label into per-neuron local states."""
    out = {}
    rest = composite
    for nid in topology.ids:
        for base in "isb":
            tag = state_name(base, nid)
            if rest.startswith(tag):
                out[nid] = base
                rest = rest[len(tag):]
                break
        else:
            raise AutomatonError(f"cannot parse composite state {composite!r}")
    if rest:
        raise AutomatonError(f"cannot parse composite state {composite!r}")
    return out


# -- winner-take-all family ----------------------------------------------------

IDLE = "i"


def winner_state(k: int | str) -> str:
    return f"s{k}"


def win_event(src: int | str, dst: int | str) -> str:
    """Unique event for the edge src -> dst; ``i`` denotes the idle state."""
    return f"w_{src}_{dst}"


@dataclass(frozen=True)
class WTAParams:
    n: int
    edges: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        if self.n < 2:
            raise BuildError("a WTA network needs N >= 2 neurons")
        for j, k in self.edges:
            if j == k:
                raise BuildError(f"excitatory edge {j}->{k} is a self-loop")
            if not (1 <= j <= self.n and 1 <= k <= self.n):
                raise BuildError(f"excitatory edge {j}->{k} is out of range")


def wta_automaton(params: WTAParams | int) -> Automaton:
    """Idle state plus one winner state per neuron, all-to-all without self-loops.

    idle <-> winner edges are external (inhibitory input); winner changes
    are internal.  Each ordered pair has its own event ``w_j_k`` so the
    noise-driven choice between successors stays deterministic per event.
    """
    if isinstance(params, int):
        params = WTAParams(params)
    n = params.n
    states = [IDLE] + [winner_state(k) for k in range(1, n + 1)]
    names = [IDLE] + list(range(1, n + 1))
    alphabet, trans = {}, set()
    for a, sa in zip(names, states):
        for b, sb in zip(names, states):
            if sa == sb:
                continue
            e = win_event(a, b)
            alphabet[e] = INHIBITORY if IDLE in (sa, sb) else INTERNAL
            trans.add((sa, e, sb))
    wta = Automaton(states, alphabet, trans, IDLE)
    return apply_excitatory_restriction(wta, params.edges) if params.edges else wta


def apply_excitatory_restriction(
    wta: Automaton, edges: Iterable[tuple[int, int]], *, keep_undesignated: bool = True
) -> Automaton:
    """Make winner changes not backed by an excitatory synapse external.

    For every winner state with at least one designated outgoing edge, its
    other winner->winner edges become external excitatory.  States without
    designated edges keep their internal edges when ``keep_undesignated``
    (free inhibitory rebound); otherwise those become external too, which
    is the regime of a realized circuit where rebound alone cannot switch.
    """
    edges = {(int(j), int(k)) for j, k in edges}
    for j, k in edges:
        if j == k:
            raise BuildError(f"excitatory edge {j}->{k} is a self-loop")
        for s in (winner_state(j), winner_state(k)):
            if s not in wta.states:
                raise BuildError(f"excitatory edge {j}->{k} names an unknown winner state")
    sources = {j for j, _ in edges}
    kinds = {}
    for src, e, dst in wta.transitions:
        if IDLE in (src, dst):
            continue
        j, k = int(src[1:]), int(dst[1:])
        if (j, k) in edges:
            kinds[e] = INTERNAL
        elif j in sources or not keep_undesignated:
            kinds[e] = EXCITATORY
    return wta.with_kinds(kinds)


def winner_events(sequence: Sequence[int | str], start_idle: bool = True) -> list[str]:
    """Map a winner sequence to WTA events (idle -> first, then changes)."""
    out = []
    prev: int | str | None = IDLE if start_idle else None
    for k in sequence:
        if prev is not None:
            out.append(win_event(prev, k))
        prev = k
    return out


__all__ = [
    "BuildError",
    "UnsupportedRewrite",
    "OutOfScope",
    "NetworkTopology",
    "SynapseLink",
    "WTAParams",
    "neuron_template",
    "apply_synapse",
    "build_network_des",
    "wta_automaton",
    "apply_excitatory_restriction",
    "winner_events",
    "has_self_loops",
]
