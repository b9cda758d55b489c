"""Deterministic untimed automata with internal/external transition kinds.

An automaton generates a prefix-closed language: there are no marked
states.  Every event symbol carries one ``TransitionKind``; external
events need an input to the network (depolarizing or hyperpolarizing) and
preempt internal ones when that input is present.
"""

from __future__ import annotations

import enum
import itertools
import json
from collections import Counter, deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence


class AutomatonError(ValueError):
    pass


class CompositionError(AutomatonError):
    pass


class TransitionKind(str, enum.Enum):
    INTERNAL = "INTERNAL"
    EXTERNAL_EXCITATORY = "EXTERNAL_EXCITATORY"
    EXTERNAL_INHIBITORY = "EXTERNAL_INHIBITORY"

    @property
    def is_external(self) -> bool:
        return self is not TransitionKind.INTERNAL


INTERNAL = TransitionKind.INTERNAL
EXCITATORY = TransitionKind.EXTERNAL_EXCITATORY
INHIBITORY = TransitionKind.EXTERNAL_INHIBITORY

Transition = tuple[str, str, str]  # (source, event, target)


@dataclass(frozen=True, eq=False)
class Automaton:
    states: frozenset[str]
    alphabet: Mapping[str, TransitionKind]
    transitions: frozenset[Transition]
    initial: str

    def __init__(
        self,
        states: Iterable[str],
        alphabet: Mapping[str, TransitionKind | str],
        transitions: Iterable[Transition],
        initial: str,
    ):
        states = frozenset(states)
        kinds = {e: TransitionKind(k) for e, k in alphabet.items()}
        trans = frozenset(tuple(t) for t in transitions)
        if initial not in states:
            raise AutomatonError(f"initial state {initial!r} is not a state")
        seen: dict[tuple[str, str], str] = {}
        for src, ev, dst in trans:
            if src not in states or dst not in states:
                raise AutomatonError(f"transition {src} -{ev}-> {dst} uses an unknown state")
            if ev not in kinds:
                raise AutomatonError(f"event {ev!r} is not in the alphabet")
            if seen.setdefault((src, ev), dst) != dst:
                raise AutomatonError(f"nondeterministic: {src} -{ev}-> {{{seen[(src, ev)]}, {dst}}}")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "alphabet", dict(sorted(kinds.items())))
        object.__setattr__(self, "transitions", trans)
        object.__setattr__(self, "initial", initial)
        object.__setattr__(self, "_delta", seen)

    def __eq__(self, other):
        if not isinstance(other, Automaton):
            return NotImplemented
        return (
            self.states == other.states
            and self.alphabet == other.alphabet
            and self.transitions == other.transitions
            and self.initial == other.initial
        )

    def __hash__(self):
        return hash((self.states, tuple(self.alphabet.items()), self.transitions, self.initial))

    def __repr__(self):
        return (
            f"Automaton({len(self.states)} states, {len(self.alphabet)} events, "
            f"{len(self.transitions)} transitions, initial={self.initial!r})"
        )

    def step(self, state: str, event: str) -> str | None:
        return self._delta.get((state, event))

    def kind(self, event: str) -> TransitionKind:
        return self.alphabet[event]

    def outgoing(self, state: str) -> list[Transition]:
        return sorted(t for t in self.transitions if t[0] == state)

    def with_kinds(self, kinds: Mapping[str, TransitionKind]) -> "Automaton":
        return Automaton(self.states, {**self.alphabet, **kinds}, self.transitions, self.initial)

    def rename_states(self, mapping: Mapping[str, str]) -> "Automaton":
        m = lambda s: mapping.get(s, s)  # noqa: E731
        return Automaton(
            {m(s) for s in self.states},
            self.alphabet,
            {(m(a), e, m(b)) for a, e, b in self.transitions},
            m(self.initial),
        )

    def rename_events(self, mapping: Mapping[str, str]) -> "Automaton":
        m = lambda e: mapping.get(e, e)  # noqa: E731
        alphabet: dict[str, TransitionKind] = {}
        for e, k in self.alphabet.items():
            if alphabet.setdefault(m(e), k) != k:
                raise AutomatonError(f"renaming merges events of different kinds into {m(e)!r}")
        return Automaton(self.states, alphabet, {(a, m(e), b) for a, e, b in self.transitions}, self.initial)

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "states": sorted(self.states),
            "alphabet": {e: k.value for e, k in self.alphabet.items()},
            "transitions": [list(t) for t in sorted(self.transitions)],
            "initial": self.initial,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "Automaton":
        if not isinstance(d, Mapping):
            raise AutomatonError("automaton document must be an object")
        unknown = set(d) - {"states", "alphabet", "transitions", "initial"}
        if unknown:
            raise AutomatonError(f"unknown keys {sorted(unknown)}")
        try:
            trans = [tuple(t) for t in d["transitions"]]
            if any(len(t) != 3 for t in trans):
                raise AutomatonError("transitions must be [source, event, target] triples")
            return cls(d["states"], d["alphabet"], trans, d["initial"])
        except KeyError as exc:
            raise AutomatonError(f"missing key {exc}") from None
        except ValueError as exc:
            if isinstance(exc, AutomatonError):
                raise
            raise AutomatonError(str(exc)) from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, ensure_ascii=False) + "\n"

    def to_dot(self, name: str = "A") -> str:
        """Graphviz source; external edges are dashed with a box (excitatory)
        or open-circle (inhibitory) marker at the source end."""
        lines = [f'digraph "{name}" {{', "  rankdir=LR;", '  __start [shape=point, label=""];']
        for s in sorted(self.states):
            lines.append(f'  "{s}" [shape=circle];')
        lines.append(f'  __start -> "{self.initial}";')
        for src, ev, dst in sorted(self.transitions):
            kind = self.alphabet[ev]
            attrs = [f'label="{ev}"']
            if kind is EXCITATORY:
                attrs += ["style=dashed", "dir=both", "arrowtail=box"]
            elif kind is INHIBITORY:
                attrs += ["style=dashed", "dir=both", "arrowtail=odot"]
            lines.append(f'  "{src}" -> "{dst}" [{", ".join(attrs)}];')
        lines.append("}")
        return "\n".join(lines) + "\n"


def load_automaton(path: str | Path) -> Automaton:
    with open(path) as fh:
        return Automaton.from_dict(json.load(fh))


def accessible(a: Automaton) -> Automaton:
    """Sub-automaton reachable from the initial state."""
    seen = {a.initial}
    queue = deque([a.initial])
    succ: dict[str, list[str]] = {}
    for src, _, dst in a.transitions:
        succ.setdefault(src, []).append(dst)
    while queue:
        s = queue.popleft()
        for d in succ.get(s, ()):
            if d not in seen:
                seen.add(d)
                queue.append(d)
    return Automaton(seen, a.alphabet, {t for t in a.transitions if t[0] in seen}, a.initial)


def _pair_labels(a: Automaton, b: Automaton) -> dict[tuple[str, str], str]:
    labels = {(x, y): f"{x}{y}" for x in a.states for y in b.states}
    if len(set(labels.values())) < len(labels):
        labels = {(x, y): f"{x}|{y}" for x in a.states for y in b.states}
    return labels


def compose(a: Automaton, b: Automaton) -> Automaton:
    """Parallel composition restricted to its accessible part.

    Shared events fire only when both components enable them; private
    events interleave.  Composite state labels concatenate the component
    labels (``i1`` + ``s2`` -> ``i1s2``).
    """
    shared = a.alphabet.keys() & b.alphabet.keys()
    for e in sorted(shared):
        if a.alphabet[e] is not b.alphabet[e]:
            raise CompositionError(
                f"event {e!r} is {a.alphabet[e].value} in one component and {b.alphabet[e].value} in the other"
            )
    alphabet = {**a.alphabet, **b.alphabet}
    label = _pair_labels(a, b)
    start = (a.initial, b.initial)
    seen = {start}
    queue = deque([start])
    trans = set()
    events = sorted(alphabet)
    while queue:
        x, y = queue.popleft()
        for e in events:
            in_a, in_b = e in a.alphabet, e in b.alphabet
            nx = a.step(x, e) if in_a else x
            ny = b.step(y, e) if in_b else y
            if nx is None or ny is None:
                continue
            nxt = (nx, ny)
            trans.add((label[(x, y)], e, label[nxt]))
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return Automaton({label[p] for p in seen}, alphabet, trans, label[start])


def compose_all(automata: Sequence[Automaton]) -> Automaton:
    if not automata:
        raise AutomatonError("nothing to compose")
    result = automata[0]
    for other in automata[1:]:
        result = compose(result, other)
    return accessible(result)


def enabled(a: Automaton, state: str, input_present: bool | TransitionKind = False) -> set[str]:
    """Events that can fire from ``state`` under the preemption rule.

    With input present, external events leaving ``state`` preempt internal
    ones.  ``input_present`` may name the input polarity
    (``EXTERNAL_EXCITATORY`` / ``EXTERNAL_INHIBITORY``) to select only the
    external events of that kind.  Without input only internal events fire.
    """
    if state not in a.states:
        raise AutomatonError(f"unknown state {state!r}")
    out = [e for s, e, _ in a.transitions if s == state]
    internal = {e for e in out if a.alphabet[e] is INTERNAL}
    if input_present is False or input_present is None:
        return internal
    if input_present is True:
        external = {e for e in out if a.alphabet[e].is_external}
    else:
        kind = TransitionKind(input_present)
        if not kind.is_external:
            raise ValueError("input polarity must be an external kind")
        external = {e for e in out if a.alphabet[e] is kind}
    return external if external else internal


def _as_events(s: Sequence[str] | str) -> list[str]:
    return s.split() if isinstance(s, str) else list(s)


def run(a: Automaton, s: Sequence[str] | str) -> tuple[int, str | None]:
    """Follow ``s`` from the initial state.

    Returns (number of events consumed, final state); the state is None
    when the string leaves the generated language.
    """
    state = a.initial
    events = _as_events(s)
    for n, e in enumerate(events):
        nxt = a.step(state, e) if e in a.alphabet else None
        if nxt is None:
            return n, None
        state = nxt
    return len(events), state


def accepts(a: Automaton, s: Sequence[str] | str) -> bool:
    """True iff ``s`` is in the generated (prefix-closed) language."""
    return run(a, s)[1] is not None


def generate_language(a: Automaton, max_len: int) -> set[tuple[str, ...]]:
    """All generated strings of length <= max_len, by bounded unfolding."""
    if max_len < 0:
        raise ValueError("max_len must be >= 0")
    out = {()}
    frontier = [((), a.initial)]
    for _ in range(max_len):
        nxt = []
        for word, state in frontier:
            for src, e, dst in a.transitions:
                if src == state:
                    w = word + (e,)
                    out.add(w)
                    nxt.append((w, dst))
        frontier = nxt
    return out


def _signature(a: Automaton, state: str, match_events: bool, match_kinds: bool):
    def edge_key(e):
        key = []
        if match_events:
            key.append(e)
        if match_kinds:
            key.append(a.alphabet[e].value)
        return tuple(key)

    out = Counter(edge_key(e) + (dst == state,) for src, e, dst in a.transitions if src == state)
    inc = Counter(edge_key(e) + (src == state,) for src, e, dst in a.transitions if dst == state)
    return (state == a.initial, tuple(sorted(out.items())), tuple(sorted(inc.items())))


def isomorphic(
    a: Automaton,
    b: Automaton,
    *,
    match_events: bool = True,
    match_kinds: bool = True,
) -> tuple[bool, dict[str, str] | None]:
    """Search for a state bijection preserving initial state and transitions.

    With ``match_events`` the event labels must coincide; without it only
    the edge structure (and kinds, if ``match_kinds``) is compared.
    Returns (found, witness mapping a-state -> b-state).
    """
    if len(a.states) != len(b.states) or len(a.transitions) != len(b.transitions):
        return False, None
    if match_events:
        if set(a.alphabet) != set(b.alphabet):
            return False, None
        if match_kinds and a.alphabet != b.alphabet:
            return False, None

    sig_a = {s: _signature(a, s, match_events, match_kinds) for s in a.states}
    sig_b = {s: _signature(b, s, match_events, match_kinds) for s in b.states}
    if Counter(sig_a.values()) != Counter(sig_b.values()):
        return False, None

    def key(ev, side):
        k = []
        if match_events:
            k.append(ev)
        if match_kinds:
            k.append(side.alphabet[ev].value)
        return tuple(k)

    edges_b = Counter((src, key(e, b), dst) for src, e, dst in b.transitions)
    edges_a = [(src, key(e, a), dst) for src, e, dst in a.transitions]
    order = sorted(a.states, key=lambda s: (s != a.initial, s))
    candidates = {s: [t for t in sorted(b.states) if sig_b[t] == sig_a[s]] for s in a.states}

    def consistent(mapping):
        # every a-edge with both ends mapped must exist in b with the same multiplicity
        need = Counter(
            (mapping[src], k, mapping[dst]) for src, k, dst in edges_a if src in mapping and dst in mapping
        )
        return all(edges_b[e] >= n for e, n in need.items())

    def search(i, mapping, used):
        if i == len(order):
            need = Counter((mapping[src], k, mapping[dst]) for src, k, dst in edges_a)
            return dict(mapping) if need == edges_b else None
        s = order[i]
        for t in candidates[s]:
            if t in used:
                continue
            mapping[s] = t
            used.add(t)
            if consistent(mapping):
                found = search(i + 1, mapping, used)
                if found is not None:
                    return found
            del mapping[s]
            used.discard(t)
        return None

    witness = search(0, {}, set())
    return witness is not None, witness


def restrict(a: Automaton, *, kinds: Iterable[TransitionKind] = (INTERNAL,), states: Iterable[str] | None = None,
             initial: str | None = None) -> Automaton:
    """Sub-automaton keeping only the given transition kinds and states."""
    kinds = set(kinds)
    keep = set(a.states if states is None else states)
    init = a.initial if initial is None else initial
    if init not in keep:
        raise AutomatonError(f"initial state {init!r} is not kept")
    trans = {(s, e, d) for s, e, d in a.transitions if s in keep and d in keep and a.alphabet[e] in kinds}
    used = {e for _, e, _ in trans}
    return Automaton(keep, {e: k for e, k in a.alphabet.items() if e in used}, trans, init)


def is_strongly_connected(a: Automaton) -> bool:
    succ: dict[str, set[str]] = {s: set() for s in a.states}
    pred: dict[str, set[str]] = {s: set() for s in a.states}
    for s, _, d in a.transitions:
        succ[s].add(d)
        pred[d].add(s)

    def reach(start, nbrs):
        seen = {start}
        stack = [start]
        while stack:
            for n in nbrs[stack.pop()]:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        return seen

    return reach(a.initial, succ) == a.states and reach(a.initial, pred) == a.states


def has_self_loops(a: Automaton) -> bool:
    return any(s == d for s, _, d in a.transitions)


def product_size(*automata: Automaton) -> int:
    n = 1
    for a in automata:
        n *= len(a.states)
    return n


def all_strings(alphabet: Iterable[str], max_len: int):
    """Every string over ``alphabet`` of length <= max_len (test oracle helper)."""
    symbols = sorted(alphabet)
    for n in range(max_len + 1):
        yield from itertools.product(symbols, repeat=n)
