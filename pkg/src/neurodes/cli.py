"""Command line front end.

Every subcommand writes its outputs plus ``manifest.json`` into ``--out``.
``neurodes rerun manifest.json`` repeats a run and must reproduce the
outputs byte for byte.  Exit codes: 0 ok, 2 bad input, 3 verdict failed
(trace not accepted, round trip mismatch).
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import re
import sys
from dataclasses import replace
from pathlib import Path
from typing import Callable

from . import __version__
from .automata import Automaton, AutomatonError, compose_all
from .builder import BuildError, WTAParams, apply_excitatory_restriction, build_network_des, load_topology, wta_automaton
from .conformance import check_conformance
from .events import AttributionConflict, extract_trace, untime, winner_sequence
from .library import kick
from .plot import write_voltage_svg
from .realization import RealizationError, realize, realize_and_simulate, round_trip_check, trial_seeds
from .sim.circuit import Bundle, CircuitError, CircuitSpec, NeuronSpec, SimConfig, StimulusProgram, SynapseSpec, parse_bundle
from .sim.simulate import IntegrationDiverged, NonRestingModel, simulate

OK, INPUT_ERROR, VIOLATION = 0, 2, 3


class InputError(Exception):
    pass


# -- input handling --------------------------------------------------------------


def _read_json(path: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    try:
        return json.loads(text), text
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None


_PATH_RE = re.compile(r"^((?:neurons|synapses|stimuli|states|transitions|config)(?:\[\d+\]|\.[A-Za-z_]+)*)")


def json_line(text: str, path: str) -> int | None:
    """Line where the value at a dotted/indexed path (``neurons[0].channels``) starts."""
    parts: list[str | int] = []
    for m in re.finditer(r"([A-Za-z_]+)|\[(\d+)\]", path):
        parts.append(m.group(1) if m.group(1) else int(m.group(2)))
    dec = json.JSONDecoder()
    ws = re.compile(r"\s*")
    pos = ws.match(text, 0).end()
    try:
        for part in parts:
            opener = text[pos]
            pos = ws.match(text, pos + 1).end()
            index = 0
            while text[pos] not in "}]":
                if opener == "{":
                    key, pos = dec.raw_decode(text, pos)
                    pos = ws.match(text, pos).end() + 1  # skip ':'
                    pos = ws.match(text, pos).end()
                    hit = key == part
                else:
                    hit = index == part
                if hit:
                    break
                _, pos = dec.raw_decode(text, pos)
                pos = ws.match(text, pos).end()
                if text[pos] == ",":
                    pos = ws.match(text, pos + 1).end()
                index += 1
            else:
                return None
    except (IndexError, ValueError):
        return None
    return text.count("\n", 0, pos) + 1


def _located(path: str, text: str, exc: Exception) -> InputError:
    msg = str(exc)
    m = _PATH_RE.match(msg)
    line = json_line(text, m.group(1)) if m else None
    return InputError(f"{path}:{line}: {msg}" if line else f"{path}: {msg}")


def load_run_input(path: str, stimulus_path: str | None = None) -> Bundle:
    """A simulation bundle, or a realization plan (simulated with its initial kick)."""
    doc, text = _read_json(path)
    try:
        if isinstance(doc, dict) and "state_map" in doc and "circuit" in doc:
            circ = doc["circuit"]
            circuit = CircuitSpec(
                tuple(NeuronSpec.from_dict(n, f"neurons[{i}]") for i, n in enumerate(circ["neurons"])),
                tuple(SynapseSpec.from_dict(s, f"synapses[{i}]") for i, s in enumerate(circ["synapses"])),
            )
            first = doc["state_map"][doc["initial"]]
            bundle = Bundle(circuit, kick(first), SimConfig(0.01, 300.0, 0))
        else:
            if not isinstance(doc, dict):
                raise CircuitError("document: expected a JSON object")
            bundle = parse_bundle(doc)
    except (CircuitError, KeyError, TypeError) as exc:
        raise _located(path, text, exc) from None
    if stimulus_path:
        sdoc, stext = _read_json(stimulus_path)
        entries = sdoc.get("stimuli", sdoc) if isinstance(sdoc, dict) else sdoc
        try:
            stim = StimulusProgram.from_list(entries)
            unknown = set(stim.pulses) - set(bundle.circuit.ids)
            if unknown:
                raise CircuitError(f"stimuli: unknown neurons {sorted(unknown)}")
        except (CircuitError, AttributeError, TypeError) as exc:
            raise _located(stimulus_path, stext, exc) from None
        bundle = replace(bundle, stimulus=stim)
    return bundle


def _automaton(path: str):
    doc, text = _read_json(path)
    try:
        return Automaton.from_dict(doc)
    except (AutomatonError, KeyError, TypeError) as exc:
        raise _located(path, text, exc) from None


def _config(args, base: SimConfig) -> SimConfig:
    try:
        return SimConfig(
            args.dt if args.dt is not None else base.dt,
            args.t_end if args.t_end is not None else base.t_end,
            args.seed if args.seed is not None else base.seed,
        )
    except CircuitError as exc:
        raise InputError(str(exc)) from None


def _edges(spec: str | None) -> set[tuple[int, int]]:
    if not spec:
        return set()
    out = set()
    for item in spec.split(","):
        m = re.fullmatch(r"\s*(\d+)\s*(?:>|->|-)\s*(\d+)\s*", item)
        if not m:
            raise InputError(f"bad edge {item!r}; expected J>K")
        out.add((int(m.group(1)), int(m.group(2))))
    return out


# -- outputs ---------------------------------------------------------------------


def _sha(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class Outputs:
    def __init__(self, out: str):
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files: list[str] = []

    def path(self, name: str) -> Path:
        self.files.append(name)
        return self.dir / name

    def text(self, name: str, content: str) -> None:
        self.path(name).write_text(content)

    def json(self, name: str, obj) -> None:
        self.text(name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(outs: Outputs, args, inputs: list[str], config: SimConfig | None, argv: list[str]) -> None:
    manifest = {
        "tool": "neurodes",
        "version": __version__,
        "subcommand": args.command,
        "argv": argv,
        "inputs": [{"path": str(Path(p).resolve()), "sha256": _sha(Path(p))} for p in inputs],
        "config": config.to_dict() if config else None,
        "out": str(outs.dir.resolve()),
        "outputs": {name: _sha(outs.dir / name) for name in sorted(set(outs.files))},
    }
    (outs.dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# -- subcommands -----------------------------------------------------------------


def _sim_runs(args, bundle: Bundle) -> list[tuple[str, SimConfig]]:
    config = _config(args, bundle.config)
    if args.trials <= 1:
        return [("", config)]
    return [(f"_{k:03d}", replace(config, seed=s)) for k, s in enumerate(trial_seeds(config.seed, args.trials))]


def cmd_simulate(args, outs: Outputs):
    bundle = load_run_input(args.bundle, args.stimulus)
    runs = _sim_runs(args, bundle)
    for suffix, cfg in runs:
        r = simulate(bundle.circuit, bundle.stimulus, cfg)
        r.write_csv(outs.path(f"trace{suffix}.csv"))
        if args.plot:
            write_voltage_svg(outs.path(f"trace{suffix}.svg"), r)
    return OK, [args.bundle] + ([args.stimulus] if args.stimulus else []), runs[0][1]


def cmd_extract(args, outs: Outputs):
    bundle = load_run_input(args.bundle, args.stimulus)
    runs = _sim_runs(args, bundle)
    for suffix, cfg in runs:
        r = simulate(bundle.circuit, bundle.stimulus, cfg)
        trace = extract_trace(r, bundle.circuit)
        trace.write_csv(outs.path(f"events{suffix}.csv"))
        outs.text(f"untimed{suffix}.txt", untime(trace) + "\n")
        outs.text(f"winners{suffix}.txt", " ".join(winner_sequence(r)) + "\n")
        if args.plot:
            write_voltage_svg(outs.path(f"trace{suffix}.svg"), r)
    return OK, [args.bundle] + ([args.stimulus] if args.stimulus else []), runs[0][1]


def cmd_check(args, outs: Outputs):
    bundle = load_run_input(args.bundle, args.stimulus)
    topology = None
    inputs = [args.bundle] + ([args.stimulus] if args.stimulus else [])
    if args.topology:
        try:
            topology = load_topology(args.topology)
        except BuildError as exc:
            raise InputError(f"{args.topology}: {exc}") from None
        except json.JSONDecodeError as exc:
            raise InputError(f"{args.topology}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
        inputs.append(args.topology)
    runs = _sim_runs(args, bundle)
    code = OK
    reports = {}
    for suffix, cfg in runs:
        r = simulate(bundle.circuit, bundle.stimulus, cfg)
        try:
            rep = check_conformance(r, bundle.circuit, topology)
        except BuildError as exc:
            raise InputError(str(exc)) from None
        reports[f"seed_{cfg.seed}" if suffix else "run"] = rep.to_dict()
        if not rep.conform:
            code = VIOLATION
            print(f"violation: {rep.reason}; accepted prefix: '{rep.accepted_prefix}'", file=sys.stderr)
        if args.plot:
            write_voltage_svg(outs.path(f"trace{suffix}.svg"), r)
    outs.json("report.json", reports)
    print("conform" if code == OK else "violation")
    return code, inputs, runs[0][1]


def _write_automaton(outs: Outputs, name: str, a) -> None:
    outs.text(f"{name}.json", a.to_json())
    outs.text(f"{name}.dot", a.to_dot(name))


def cmd_build_des(args, outs: Outputs):
    try:
        topology = load_topology(args.topology)
        des = build_network_des(topology, stimulate_at_rest=not args.plain)
    except json.JSONDecodeError as exc:
        raise InputError(f"{args.topology}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    except (BuildError, OSError) as exc:
        raise InputError(f"{args.topology}: {exc}") from None
    _write_automaton(outs, "network", des)
    return OK, [args.topology], None


def cmd_compose(args, outs: Outputs):
    parts = [_automaton(p) for p in args.automata]
    try:
        a = compose_all(parts)
    except AutomatonError as exc:
        raise InputError(str(exc)) from None
    _write_automaton(outs, "composed", a)
    return OK, list(args.automata), None


def cmd_wta(args, outs: Outputs):
    try:
        a = wta_automaton(WTAParams(args.n, frozenset(_edges(args.edges))))
    except BuildError as exc:
        raise InputError(str(exc)) from None
    _write_automaton(outs, "wta", a)
    return OK, [], None


def cmd_restrict(args, outs: Outputs):
    a = _automaton(args.automaton)
    try:
        r = apply_excitatory_restriction(a, _edges(args.edges), keep_undesignated=not args.strict)
    except (BuildError, AutomatonError, ValueError) as exc:
        raise InputError(str(exc)) from None
    _write_automaton(outs, "restricted", r)
    return OK, [args.automaton], None


def cmd_realize(args, outs: Outputs):
    a = _automaton(args.automaton)
    try:
        plan = realize(a)
    except RealizationError as exc:
        raise InputError(f"{args.automaton}: {exc}") from None
    plan.write(outs.path("plan.json"))
    config = _config(args, SimConfig(0.01, 300.0, 0))
    bundle = Bundle(plan.circuit, kick(plan.state_map[plan.initial]), config)
    outs.json("circuit.json", bundle.to_dict())
    if args.trials > 0:
        runs = realize_and_simulate(a, args.trials, config.seed, config.t_end, config.dt, plan=plan)
        outs.json(
            "runs.json",
            [{"seed": r.seed, "states": list(r.states), "overlap_steps": r.overlap_steps} for r in runs],
        )
    return OK, [args.automaton], config


def cmd_round_trip(args, outs: Outputs):
    a = _automaton(args.automaton)
    try:
        verdict = round_trip_check(a)
    except RealizationError as exc:
        raise InputError(f"{args.automaton}: {exc}") from None
    outs.json("round_trip.json", {"pass": verdict.passed, "witness": verdict.witness, "mismatch": verdict.mismatch})
    print("pass" if verdict.passed else f"fail: {verdict.mismatch}")
    return (OK if verdict.passed else VIOLATION), [args.automaton], None


def cmd_export_dot(args, outs: Outputs):
    a = _automaton(args.automaton)
    outs.text(f"{Path(args.automaton).stem}.dot", a.to_dot(Path(args.automaton).stem))
    return OK, [args.automaton], None


def cmd_rerun(args, outs: Outputs | None):
    doc, _ = _read_json(args.manifest)
    try:
        for item in doc["inputs"]:
            if _sha(Path(item["path"])) != item["sha256"]:
                raise InputError(f"{item['path']}: content changed since the manifest was written")
        argv = list(doc["argv"])
    except (KeyError, TypeError, OSError) as exc:
        raise InputError(f"{args.manifest}: malformed manifest ({exc})") from None
    out = args.out or doc["out"]
    return main(argv + ["--out", out])


COMMANDS: dict[str, Callable] = {
    "simulate": cmd_simulate,
    "extract": cmd_extract,
    "check": cmd_check,
    "build-des": cmd_build_des,
    "compose": cmd_compose,
    "wta": cmd_wta,
    "restrict": cmd_restrict,
    "realize": cmd_realize,
    "round-trip": cmd_round_trip,
    "export-dot": cmd_export_dot,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--dt", type=float)
    common.add_argument("--t-end", type=float)
    common.add_argument("--seed", type=int)
    common.add_argument("--out", default="out")
    common.add_argument("--plot", action="store_true", help="also write SVG voltage plots")
    common.add_argument("--trials", type=int, default=1)

    p = argparse.ArgumentParser(prog="neurodes", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    for name in ("simulate", "extract", "check"):
        s = sub.add_parser(name, parents=[common])
        s.add_argument("bundle", help="circuit+stimulus JSON (or a realization plan)")
        s.add_argument("--stimulus", help="separate stimulus JSON overriding the bundle's")
        if name == "check":
            s.add_argument("--topology", help="topology JSON (default: derived from the circuit)")
    s = sub.add_parser("build-des", parents=[common])
    s.add_argument("topology")
    s.add_argument("--plain", action="store_true", help="keep external transitions out of every state")
    s = sub.add_parser("compose", parents=[common])
    s.add_argument("automata", nargs="+")
    s = sub.add_parser("wta", parents=[common])
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--edges", help="designated excitatory edges, e.g. 1>3,2>3")
    s = sub.add_parser("restrict", parents=[common])
    s.add_argument("automaton")
    s.add_argument("--edges", required=True)
    s.add_argument("--strict", action="store_true", help="also make winner changes of undesignated states external")
    s = sub.add_parser("realize", parents=[common])
    s.add_argument("automaton")
    s.set_defaults(trials=0)
    s = sub.add_parser("round-trip", parents=[common])
    s.add_argument("automaton")
    s = sub.add_parser("export-dot", parents=[common])
    s.add_argument("automaton")
    s = sub.add_parser("rerun")
    s.add_argument("manifest")
    s.add_argument("--out")
    return p


def _canonical_argv(argv: list[str]) -> list[str]:
    """argv without --out, with existing input files made absolute."""
    out, skip = [], False
    for tok in argv:
        if skip:
            skip = False
            continue
        if tok == "--out":
            skip = True
            continue
        if tok.startswith("--out="):
            continue
        out.append(str(Path(tok).resolve()) if not tok.startswith("-") and os.path.isfile(tok) else tok)
    return out


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    args = build_parser().parse_args(argv)
    try:
        if args.command == "rerun":
            return cmd_rerun(args, None)
        if args.trials < 0:
            raise InputError("--trials must be >= 0")
        outs = Outputs(args.out)
        code, inputs, config = COMMANDS[args.command](args, outs)
        _write_manifest(outs, args, inputs, config, _canonical_argv(argv))
        return code
    except InputError as exc:
        print(f"neurodes: error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except (AttributionConflict, NonRestingModel) as exc:
        print(f"neurodes: error: {exc}", file=sys.stderr)
        return INPUT_ERROR
    except IntegrationDiverged as exc:
        print(f"neurodes: integration diverged: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
