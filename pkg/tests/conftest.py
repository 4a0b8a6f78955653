import random
from pathlib import Path

import pytest

from ctmcheck import parse_model

CORPUS = Path(__file__).resolve().parent.parent / "corpus"

PURE_BIRTH = "ctmc module m x:[0..] init 0; [] x>=0 -> 1.0:(x'=x+1); endmodule"

# two commands enabled everywhere; embedded jump probabilities 0.8 / 0.2
TWO_COMMAND = """
ctmc
module two
  x : [0..] init 0;
  y : [0..] init 0;
  [] true -> 4.0 : (x'=x+1);
  [] true -> 1.0 : (y'=y+1);
endmodule
"""

TWO_STATE = """
ctmc
module flip
  x : [0..1] init 0;
  [] x = 0 -> 1.0 : (x'=1);
endmodule
"""

ERLANG2 = """
ctmc
module chain
  x : [0..2] init 0;
  [] x < 2 -> 1.0 : (x'=x+1);
endmodule
"""


def corpus_model(name):
    return parse_model((CORPUS / f"{name}.sm").read_text())


def corpus_property_text(name):
    return (CORPUS / f"{name}.csl").read_text()


def random_ctmc_source(rng, min_states=8, max_states=200):
    """Random strongly reachable finite CTMC as model text: one location
    variable, a random spanning tree plus extra edges, rates in [0.1, 10]."""
    n = rng.randint(min_states, max_states)
    lines = ["ctmc", "module rnd", f"x : [0..{n - 1}] init 0;"]
    for j in range(1, n):
        i = rng.randrange(j)
        rate = round(rng.uniform(0.1, 10.0), 6)
        lines.append(f"[] x = {i} -> {rate} : (x'={j});")
    for i in range(n):
        extra = rng.randint(0, 3)
        if extra:
            for j in rng.sample([k for k in range(n) if k != i], extra):
                rate = round(rng.uniform(0.1, 10.0), 6)
                lines.append(f"[] x = {i} -> {rate} : (x'={j});")
    lines.append("endmodule")
    return n, "\n".join(lines)


def random_until_property(rng, n):
    t = round(rng.uniform(0.1, 20.0), 3)
    a, b = sorted(rng.sample(range(n), 2))
    phi = rng.choice(["true", f"x != {rng.randrange(n)}", f"x < {max(a, 1)}"])
    return f"P=? [ {phi} U<={t} (x = {a} | x = {b}) ]"


@pytest.fixture
def rng():
    return random.Random(1729)
