import sys

import numpy as np
import pytest

from mugrid.netmodel import Line, Network, Node
from mugrid.synth import SynthConfig, generate, generate_case


def two_bus(g=0.0, b=-1.0, V=(1.0, 1.0)):
    return Network((Node(0, voltage=V[0]), Node(1, voltage=V[1])), (Line(0, 1, g, b),))


def chain(ys, shunts=None, kinds=None):
    n = len(ys) + 1
    shunts = shunts or [0j] * n
    kinds = kinds or ["active"] * n
    nodes = tuple(Node(i, kinds[i], 1.0, shunts[i]) for i in range(n))
    lines = tuple(Line(i, i + 1, y.real, y.imag) for i, y in enumerate(ys))
    return Network(nodes, lines)


def random_case(seed, n_range=(3, 12), **kw):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    return generate_case(SynthConfig(n=n, seed=seed, **kw))


def random_net(seed, n_range=(3, 12), **kw):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    return generate(SynthConfig(n=n, seed=seed, **kw))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
