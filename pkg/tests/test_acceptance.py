"""End-to-end acceptance checks, one test per criterion."""

import itertools
import json
import time

import numpy as np
import pytest

from conftest import FIXTURES
from neurodes.automata import accepts, compose, generate_language, has_self_loops, is_strongly_connected, isomorphic
from neurodes.builder import NetworkTopology, apply_synapse, build_network_des, neuron_template, wta_automaton
from neurodes.cli import main
from neurodes.conformance import check_conformance
from neurodes.events import detect_spikes, extract_trace, group_episodes, overlap_steps, untime, winner_sequence
from neurodes.experiments import default_wta, steering_trial, wta_trial
from neurodes.library import excitability_bundle, hco_bundle, rebound_bundles
from neurodes.realization import accepts_path, random_automaton, realize_and_simulate, round_trip_check
from neurodes.automata import load_automaton
from neurodes.sim.simulate import simulate

pytestmark = pytest.mark.acceptance


def test_excitability(criterion):
    b = excitability_bundle()
    simulate(b.circuit, b.stimulus, b.config)  # compile once; the timing below is for a warm run
    t0 = time.perf_counter()
    r = simulate(b.circuit, b.stimulus, b.config)
    trace = extract_trace(r, b.circuit)
    elapsed = time.perf_counter() - t0
    v = r.v("1")
    split = int(round(30.0 / r.dt))
    first, second = v[:split], v[split:]
    n_second = len(detect_spikes(second, r.dt))
    ok = first.max() < 0.0 and n_second == 1 and 25.0 <= second.max() <= 45.0 and elapsed < 1.0
    criterion(1, ok, f"3.75 uA max {first.max():.1f} mV; 3.95 uA {n_second} spike peaking "
                     f"{second.max():.1f} mV; {untime(trace)!r}; {elapsed:.2f} s")
    assert ok


def test_rebound(criterion):
    dep, hyp = rebound_bundles()
    r1 = simulate(dep.circuit, dep.stimulus, dep.config)
    r2 = simulate(hyp.circuit, hyp.stimulus, hyp.config)
    s1 = untime(extract_trace(r1, dep.circuit))
    s2 = untime(extract_trace(r2, hyp.circuit))
    spikes_dep = detect_spikes(r1.v("1"), r1.dt)
    spikes_hyp = detect_spikes(r2.v("1"), r2.dt)
    eps = group_episodes(spikes_hyp)
    isis = np.diff(spikes_hyp)
    ok = (len(spikes_dep) >= 1 and len(spikes_hyp) >= 2 and len(eps) == 1 and np.all(isis <= 30.0)
          and s1 == "sigma1 eta1" and s2 == "beta1 rho1")
    criterion(2, ok, f"depolarized {len(spikes_dep)} spike(s) {s1!r}; released {len(spikes_hyp)} spikes, "
                     f"max ISI {isis.max():.1f} ms {s2!r}")
    assert ok


def test_single_neuron_templates(criterion):
    pairs = [("LIF", "lif"), ("EXCITABLE", "excitable"), ("REBOUND_SPIKING", "rebound"),
             ("SPIKING_REBOUND_BURSTING", "burster")]
    results = {cls: isomorphic(neuron_template(cls, 1), FIXTURES[fx]())[0] for cls, fx in pairs}
    ok = all(results.values())
    criterion(3, ok, ", ".join(f"{c}={'ok' if v else 'MISMATCH'}" for c, v in results.items()))
    assert ok


def test_synapse_constructions(criterion):
    def pair(kind):
        return NetworkTopology.build([(1, "REBOUND_SPIKING"), (2, "REBOUND_SPIKING")], [(1, 2, kind)], [1])

    exc = build_network_des(pair("EXCITATORY"))
    inh = build_network_des(pair("INHIBITORY"))
    r = apply_synapse(pair("EXCITATORY"))
    plain = compose(r["1"], r["2"])
    ok_exc = isomorphic(exc, FIXTURES["exc_network"]())[0] and isomorphic(plain, FIXTURES["exc_network"]())[0]
    ok_inh = isomorphic(inh, FIXTURES["inh_network"]())[0]
    ok = ok_exc and ok_inh and len(exc.states) == 4 and len(inh.states) == 3
    criterion(4, ok, f"excitatory pair {len(exc.states)} states ({'iso' if ok_exc else 'not iso'}), "
                     f"inhibitory pair {len(inh.states)} states ({'iso' if ok_inh else 'not iso'})")
    assert ok


def test_hco(criterion, data_dir, tmp_path):
    b = hco_bundle(1000.0)
    simulate(b.circuit, b.stimulus, b.config.__class__(b.config.dt, 1.0, 0))
    t0 = time.perf_counter()
    r = simulate(b.circuit, b.stimulus, b.config)
    rep = check_conformance(r, b.circuit)
    elapsed = time.perf_counter() - t0
    w = winner_sequence(r)
    alternations = sum(1 for x, y in zip(w, w[1:]) if x != y)
    exclusive = overlap_steps(r) == 0 and all(x != y for x, y in zip(w, w[1:]))
    code = main(["check", str(data_dir / "hco.json"), "--out", str(tmp_path)])
    ok = alternations >= 10 and exclusive and rep.conform and code == 0 and elapsed < 10.0
    criterion(5, ok, f"{alternations} alternations in {b.config.t_end:g} ms, overlap steps {overlap_steps(r)}, "
                     f"conform={rep.conform}, check exit {code}, {elapsed:.2f} s")
    assert ok


def test_wta_family(criterion):
    rows = []
    for n in range(2, 7):
        a = wta_automaton(n)
        rows.append(len(a.states) == n + 1 and len(a.transitions) == n * (n + 1)
                    and not has_self_loops(a) and is_strongly_connected(a))
    ok = all(rows)
    criterion(6, ok, "N=2..6 " + " ".join("ok" if x else "bad" for x in rows))
    assert ok


def test_wta_simulation(criterion):
    c = default_wta(3)
    trials = [wta_trial(c, seed, t_end=500.0) for seed in range(100)]
    overlap = sum(1 for t in trials if t.overlap_steps)
    repeats = sum(1 for t in trials if t.repeated)
    shortest = min(len(t.winners) for t in trials)
    steer = [steering_trial(c, seed + 1000) for seed in range(100)]
    steered = sum(s.steered for s in steer)
    ok = overlap == 0 and repeats == 0 and shortest >= 5 and steered >= 95
    criterion(7, ok, f"100 trials: {overlap} with overlap, {repeats} with repeated winner, "
                     f">= {shortest} wins each; steered {steered}/100")
    assert ok


def test_realization(criterion, data_dir):
    rng = np.random.default_rng(2024)
    randoms = [random_automaton(rng, int(rng.integers(3, 7)), float(rng.uniform(0.3, 0.8))) for _ in range(50)]
    rt = sum(round_trip_check(a).passed for a in randoms)

    cycle = load_automaton(data_dir / "cycle3.json")
    cyc = realize_and_simulate(cycle, trials=10, seed=1)
    cyc_ok = sum(accepts_path(cycle, o.states) and len(o.states) >= 4 for o in cyc)

    branch = load_automaton(data_dir / "branch3.json")
    runs = realize_and_simulate(branch, trials=100, seed=2)
    observed = set().union(*(o.transitions for o in runs))
    edges = {(s, d) for s, _, d in branch.transitions}
    bad_paths = sum(not accepts_path(branch, o.states) for o in runs)
    ok = rt == 50 and cyc_ok == 10 and observed == edges and bad_paths == 0
    criterion(8, ok, f"round trip {rt}/50; cycle {cyc_ok}/10 consistent; branching observed "
                     f"{sorted(observed)} vs edges {sorted(edges)}, {bad_paths} off-path trials")
    assert ok


def test_oracle_equivalence(criterion):
    mismatches = 0
    checked = 0
    for make in FIXTURES.values():
        a = make()
        lang = generate_language(a, 6)
        symbols = sorted(a.alphabet)
        for k in range(7):
            for w in itertools.product(symbols, repeat=k):
                checked += 1
                mismatches += accepts(a, w) != (w in lang)
    names = sorted(FIXTURES)
    comm = all(isomorphic(compose(FIXTURES[x](), FIXTURES[y]()), compose(FIXTURES[y](), FIXTURES[x]()))[0]
               for x, y in itertools.combinations(names, 2))
    assoc = True
    for x, y, z in itertools.combinations(names, 3):
        a, b, c = FIXTURES[x](), FIXTURES[y](), FIXTURES[z]()
        assoc &= isomorphic(compose(compose(a, b), c), compose(a, compose(b, c)))[0]
    ok = mismatches == 0 and comm and assoc
    criterion(9, ok, f"{checked} strings, {mismatches} mismatches; commutative={comm}, associative={assoc}")
    assert ok


def test_determinism(criterion, data_dir, tmp_path):
    pipelines = {
        "simulate": ["simulate", data_dir / "excitability.json", "--plot"],
        "simulate-trials": ["simulate", data_dir / "wta3.json", "--trials", "2", "--t-end", "100"],
        "extract": ["extract", data_dir / "hco.json"],
        "check": ["check", data_dir / "hco.json"],
        "check-violation": ["check", data_dir / "excitatory_chain.json", "--topology",
                            data_dir / "topology_inh_pair.json"],
        "build-des": ["build-des", data_dir / "topology_hco.json"],
        "wta": ["wta", "--n", "3", "--edges", "1>3,2>3"],
        "realize": ["realize", data_dir / "branch3.json", "--trials", "2", "--t-end", "200"],
        "round-trip": ["round-trip", data_dir / "cycle3.json"],
        "export-dot": ["export-dot", data_dir / "branch3.json"],
    }
    bad = []
    for name, argv in pipelines.items():
        first, second = tmp_path / name / "a", tmp_path / name / "b"
        code = main([str(x) for x in argv] + ["--out", str(first)])
        code2 = main(["rerun", str(first / "manifest.json"), "--out", str(second)])
        m1 = json.loads((first / "manifest.json").read_text())
        m2 = json.loads((second / "manifest.json").read_text())
        same = code == code2 and m1["outputs"] == m2["outputs"] and all(
            (first / f).read_bytes() == (second / f).read_bytes() for f in m1["outputs"]
        )
        if not same:
            bad.append(name)
    ok = not bad
    criterion(10, ok, f"{len(pipelines) - len(bad)}/{len(pipelines)} pipelines byte-identical on rerun"
                      + (f" (differ: {', '.join(bad)})" if bad else ""))
    assert ok
