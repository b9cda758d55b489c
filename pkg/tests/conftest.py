import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from neurodes.automata import EXCITATORY as X, INHIBITORY as H, INTERNAL as I, Automaton  # noqa: E402

DATA = Path(__file__).resolve().parents[1] / "data"


# Hand-written automata, one per construction the library must reproduce.

def lif_fixture():
    return Automaton({"i1"}, {"sigma1": X}, {("i1", "sigma1", "i1")}, "i1")


def excitable_fixture():
    return Automaton({"i1", "s1"}, {"sigma1": X, "eta1": I}, {("i1", "sigma1", "s1"), ("s1", "eta1", "i1")}, "i1")


def rebound_fixture(n="1"):
    return Automaton(
        {f"i{n}", f"s{n}"},
        {f"sigma{n}": X, f"rho_rebound{n}": H, f"eta{n}": I},
        {(f"i{n}", f"sigma{n}", f"s{n}"), (f"i{n}", f"rho_rebound{n}", f"s{n}"), (f"s{n}", f"eta{n}", f"i{n}")},
        f"i{n}",
    )


def burster_fixture():
    return Automaton(
        {"i1", "s1", "b1"},
        {"sigma1": X, "beta1": H, "eta1": I, "rho1": I},
        {("i1", "sigma1", "s1"), ("i1", "beta1", "b1"), ("s1", "eta1", "i1"), ("b1", "rho1", "i1")},
        "i1",
    )


def exc_target_fixture():
    """Neuron 2 driven by an excitatory synapse from neuron 1, no outside input."""
    return Automaton(
        {"i2", "s2"},
        {"sigma1": X, "rho_rebound1": H, "eta2": I},
        {("i2", "sigma1", "s2"), ("i2", "rho_rebound1", "s2"), ("s2", "eta2", "i2")},
        "i2",
    )


def exc_network_fixture():
    return Automaton(
        {"i1i2", "s1s2", "i1s2", "s1i2"},
        {"sigma1": X, "rho_rebound1": H, "eta1": I, "eta2": I},
        {
            ("i1i2", "sigma1", "s1s2"),
            ("i1i2", "rho_rebound1", "s1s2"),
            ("s1s2", "eta1", "i1s2"),
            ("s1s2", "eta2", "s1i2"),
            ("i1s2", "eta2", "i1i2"),
            ("s1i2", "eta1", "i1i2"),
        },
        "i1i2",
    )


def inh_target_fixture():
    return Automaton({"i2", "s2"}, {"eta1": I, "eta2": I}, {("i2", "eta1", "s2"), ("s2", "eta2", "i2")}, "i2")


def inh_network_fixture():
    return Automaton(
        {"i1i2", "s1i2", "i1s2"},
        {"sigma1": X, "rho_rebound1": H, "eta1": I, "eta2": I},
        {
            ("i1i2", "sigma1", "s1i2"),
            ("i1i2", "rho_rebound1", "s1i2"),
            ("s1i2", "eta1", "i1s2"),
            ("i1s2", "eta2", "i1i2"),
        },
        "i1i2",
    )


def hco_network_fixture():
    return Automaton(
        {"i1i2", "s1i2", "i1s2"},
        {"sigma1": X, "rho_rebound1": H, "eta1": I, "eta2": I},
        {
            ("i1i2", "sigma1", "s1i2"),
            ("i1i2", "rho_rebound1", "s1i2"),
            ("s1i2", "eta1", "i1s2"),
            ("i1s2", "eta2", "s1i2"),
        },
        "i1i2",
    )


def directed_wta_fixture():
    """Three winners; excitation enforces 1->3 and 2->3, the 1<->2 swap needs input."""
    t = set()
    alpha = {}
    for k in (1, 2, 3):
        t |= {("i", f"w_i_{k}", f"s{k}"), (f"s{k}", f"w_{k}_i", "i")}
        alpha[f"w_i_{k}"] = alpha[f"w_{k}_i"] = H
    for j, k, kind in [(1, 3, I), (2, 3, I), (1, 2, X), (2, 1, X), (3, 1, I), (3, 2, I)]:
        t.add((f"s{j}", f"w_{j}_{k}", f"s{k}"))
        alpha[f"w_{j}_{k}"] = kind
    return Automaton({"i", "s1", "s2", "s3"}, alpha, t, "i")


FIXTURES = {
    "lif": lif_fixture,
    "excitable": excitable_fixture,
    "rebound": rebound_fixture,
    "burster": burster_fixture,
    "exc_target": exc_target_fixture,
    "exc_network": exc_network_fixture,
    "inh_target": inh_target_fixture,
    "inh_network": inh_network_fixture,
    "hco_network": hco_network_fixture,
    "directed_wta": directed_wta_fixture,
}


@pytest.fixture(params=sorted(FIXTURES))
def any_fixture(request):
    return FIXTURES[request.param]()


@pytest.fixture
def data_dir():
    return DATA


ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion; printed at the end of the run."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE[n] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
