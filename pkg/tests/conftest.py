from __future__ import annotations

import random
import sys

import pytest

from smartsmc.model import load_model
from smartsmc.prop import resolve_property


@pytest.fixture(scope="session")
def choice():
    return load_model("choice")


@pytest.fixture(scope="session")
def choice_prop(choice):
    return resolve_property("once", choice)


@pytest.fixture(scope="session")
def coordination():
    return load_model("coordination")


def random_model_text(rng: random.Random) -> str:
    """A small well-formed model: bounded domains, constant or copy updates, maybe deadlocks."""
    nvars = rng.randint(1, 3)
    lines = []
    domains = []
    for i in range(nvars):
        lo = rng.randint(-2, 1)
        hi = lo + rng.randint(1, 3)
        init = rng.randint(lo, hi)
        extra = f" bits {rng.randint(hi - lo, 4).bit_length() + 1}" if rng.random() < 0.3 else ""
        lines.append(f"var v{i} : [{lo}..{hi}] init {init}{extra};")
        domains.append((lo, hi))
    ncmd = rng.randint(1, 4)
    for c in range(ncmd):
        v = rng.randrange(nvars)
        lo, hi = domains[v]
        op = rng.choice(["=", "!=", "<=", ">="])
        guard = "true" if rng.random() < 0.3 else f"v{v}{op}{rng.randint(lo, hi)}"
        nb = rng.randint(1, 3)
        cuts = sorted(rng.sample(range(1, 10), nb - 1))
        weights = [b - a for a, b in zip([0] + cuts, cuts + [10])]
        branches = []
        for w in weights:
            ups = []
            for u in rng.sample(range(nvars), rng.randint(1, nvars)):
                ulo, uhi = domains[u]
                if rng.random() < 0.25:
                    ups.append(f"(v{u}'=v{u})")
                else:
                    ups.append(f"(v{u}'={rng.randint(ulo, uhi)})")
            branches.append(f"{w / 10}:" + "&".join(ups))
        lines.append(f"[c{c}] {guard} -> " + " + ".join(branches) + ";")
    return "\n".join(lines) + "\n"


def random_property_text(rng: random.Random, nvars_text: str, depth: int = 2) -> str:
    names = sorted(set(t.split()[1] for t in nvars_text.splitlines() if t.startswith("var ")))

    def go(d: int) -> str:
        if d == 0 or rng.random() < 0.3:
            return f"{rng.choice(names)}{rng.choice(['=', '!=', '<', '>='])}{rng.randint(-2, 3)}"
        kind = rng.choice(["!", "&", "|", "X", "F", "G", "U"])
        if kind == "!":
            return f"!({go(d - 1)})"
        if kind in "&|":
            return f"({go(d - 1)}) {kind} ({go(d - 1)})"
        if kind == "X":
            return f"X ({go(d - 1)})"
        if kind == "U":
            return f"({go(d - 1)}) U<={rng.randint(0, 3)} ({go(d - 1)})"
        return f"{kind}<={rng.randint(0, 3)} ({go(d - 1)})"

    return go(depth)


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    if module is None or not module.REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(module.REPORT):
        terminalreporter.write_line(module.REPORT[n])
