"""Static network model: nodes, lines, admittance matrix and JSON I/O.

All quantities are per unit. Base values are carried as metadata only.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

ACTIVE = "active"
PASSIVE = "passive"
CLOSED = "closed"
OPEN = "open"


class NetworkError(ValueError):
    """Raised for malformed networks (duplicate lines, unknown lines, bad params)."""


@dataclass(frozen=True)
class Node:
    id: int
    kind: str = ACTIVE
    voltage: float = 1.0
    shunt: complex = 0j

    def __post_init__(self):
        if self.kind not in (ACTIVE, PASSIVE):
            raise NetworkError(f"node {self.id}: unknown kind {self.kind!r}")
        if not self.voltage > 0:
            raise NetworkError(f"node {self.id}: voltage must be positive, got {self.voltage}")


@dataclass(frozen=True)
class Line:
    i: int
    k: int
    g: float = 0.0
    b: float = -1.0
    status: str = CLOSED

    def __post_init__(self):
        if self.i == self.k:
            raise NetworkError(f"line ({self.i}, {self.k}) is a self-loop")
        if self.status not in (CLOSED, OPEN):
            raise NetworkError(f"line ({self.i}, {self.k}): unknown status {self.status!r}")

    @property
    def y(self) -> complex:
        return complex(self.g, self.b)

    @property
    def pair(self) -> tuple[int, int]:
        return (min(self.i, self.k), max(self.i, self.k))

    @property
    def closed(self) -> bool:
        return self.status == CLOSED


@dataclass(frozen=True)
class InterfaceParams:
    """Virtual inertia ``m``, damping ``d`` and power setpoint per active node."""

    ids: tuple[int, ...]
    m: np.ndarray
    d: np.ndarray
    p_set: np.ndarray

    def __post_init__(self):
        ids = tuple(int(i) for i in self.ids)
        object.__setattr__(self, "ids", ids)
        for name in ("m", "d", "p_set"):
            arr = np.asarray(getattr(self, name), dtype=float).copy()
            if arr.shape != (len(ids),):
                raise NetworkError(f"interface {name} has shape {arr.shape}, expected ({len(ids)},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def uniform(cls, n: int, m: float = 1.0, d: float = 1.0, p_set=None) -> "InterfaceParams":
        p = np.zeros(n) if p_set is None else p_set
        return cls(tuple(range(n)), np.full(n, m), np.full(n, d), p)

    def select(self, ids: Sequence[int]) -> "InterfaceParams":
        """Restrict to ``ids`` (in that order); raises if any id has no parameters."""
        pos = {i: j for j, i in enumerate(self.ids)}
        missing = [i for i in ids if i not in pos]
        if missing:
            raise NetworkError(f"missing interface parameters for node(s) {missing}")
        idx = [pos[i] for i in ids]
        return InterfaceParams(tuple(ids), self.m[idx], self.d[idx], self.p_set[idx])

    def with_values(self, m=None, d=None, p_set=None) -> "InterfaceParams":
        return InterfaceParams(
            self.ids,
            self.m if m is None else m,
            self.d if d is None else d,
            self.p_set if p_set is None else p_set,
        )


@dataclass(frozen=True)
class Network:
    nodes: tuple[Node, ...]
    lines: tuple[Line, ...]
    base: dict = field(default_factory=lambda: {"p_mw": 100.0, "v_kv": 1.0})
    names: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "lines", tuple(self.lines))
        ids = [nd.id for nd in self.nodes]
        if ids != list(range(len(ids))):
            raise NetworkError("node ids must be dense 0..n-1 in order")
        n = len(ids)
        for ln in self.lines:
            if not (0 <= ln.i < n and 0 <= ln.k < n):
                raise NetworkError(f"line ({ln.i}, {ln.k}) references unknown node")

    @property
    def n(self) -> int:
        return len(self.nodes)

    @property
    def voltages(self) -> np.ndarray:
        return np.array([nd.voltage for nd in self.nodes])

    @property
    def shunts(self) -> np.ndarray:
        return np.array([nd.shunt for nd in self.nodes], dtype=complex)

    @property
    def active(self) -> list[int]:
        return [nd.id for nd in self.nodes if nd.kind == ACTIVE]

    @property
    def passive(self) -> list[int]:
        return [nd.id for nd in self.nodes if nd.kind == PASSIVE]

    @property
    def closed_lines(self) -> list[Line]:
        return [ln for ln in self.lines if ln.closed]

    @property
    def is_lossless(self) -> bool:
        """True when every closed line has zero transfer conductance."""
        return all(ln.g == 0 for ln in self.closed_lines)

    def find_line(self, i: int, k: int) -> int:
        key = (min(i, k), max(i, k))
        for idx, ln in enumerate(self.lines):
            if ln.pair == key:
                return idx
        raise NetworkError(f"no line between nodes {i} and {k}")

    def with_voltages(self, V) -> "Network":
        nodes = tuple(replace(nd, voltage=float(v)) for nd, v in zip(self.nodes, V))
        return replace(self, nodes=nodes)

    @classmethod
    def from_admittance(cls, Y, V=None, kinds=None, tol: float = 0.0) -> "Network":
        """Recover lines (``y = -Y_ik``) and shunts (row sums) from an admittance matrix."""
        Y = np.asarray(Y, dtype=complex)
        n = Y.shape[0]
        V = np.ones(n) if V is None else np.asarray(V, dtype=float)
        kinds = [ACTIVE] * n if kinds is None else list(kinds)
        shunt = Y.sum(axis=1)
        scale = np.abs(Y).max() if Y.size else 0.0
        shunt[np.abs(shunt) <= 1e-12 * scale] = 0
        nodes = [Node(i, kinds[i], float(V[i]), complex(shunt[i])) for i in range(n)]
        lines = []
        for i in range(n):
            for k in range(i + 1, n):
                if abs(Y[i, k]) > tol:
                    y = -Y[i, k]
                    lines.append(Line(i, k, float(y.real), float(y.imag)))
        return cls(tuple(nodes), tuple(lines))


def build_admittance(net: Network) -> np.ndarray:
    """Nodal admittance matrix Y = G + jB over closed lines plus node shunts."""
    n = net.n
    Y = np.zeros((n, n), dtype=complex)
    seen = set()
    for ln in net.lines:
        if ln.pair in seen:
            raise NetworkError(f"duplicate line between nodes {ln.pair[0]} and {ln.pair[1]}")
        seen.add(ln.pair)
        if not ln.closed:
            continue
        y = ln.y
        Y[ln.i, ln.k] -= y
        Y[ln.k, ln.i] -= y
        Y[ln.i, ln.i] += y
        Y[ln.k, ln.k] += y
    Y[np.diag_indices(n)] += net.shunts
    return Y


def polar(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Magnitudes |Y_ik| and angles theta_ik of the admittance entries."""
    return np.abs(Y), np.angle(Y)


def set_line_status(net: Network, i: int, k: int, status: str) -> Network:
    idx = net.find_line(i, k)
    lines = list(net.lines)
    lines[idx] = replace(lines[idx], status=status)
    return replace(net, lines=tuple(lines))


def _adjacency(n: int, pairs: Iterable[tuple[int, int]]):
    pairs = list(pairs)
    if not pairs:
        return coo_matrix((n, n))
    r, c = np.array(pairs).T
    data = np.ones(len(pairs))
    return coo_matrix((data, (r, c)), shape=(n, n))


def components(net: Network) -> tuple[int, np.ndarray]:
    """Connected components of the closed-line graph (lines with nonzero admittance)."""
    pairs = [(ln.i, ln.k) for ln in net.closed_lines if ln.y != 0]
    return connected_components(_adjacency(net.n, pairs), directed=False)


def is_connected(net: Network) -> bool:
    return components(net)[0] <= 1


@dataclass
class Diagnostics:
    connected: bool
    n_components: int
    labels: np.ndarray
    sign_violations: list
    dangling: list
    duplicates: list

    @property
    def ok(self) -> bool:
        return self.connected and not self.sign_violations and not self.duplicates


def validate_network(net: Network) -> Diagnostics:
    """Sign-convention, connectivity and dangling-node report; never raises."""
    sign = []
    seen, dup = set(), []
    degree = np.zeros(net.n, dtype=int)
    for idx, ln in enumerate(net.lines):
        if ln.pair in seen:
            dup.append(ln.pair)
        seen.add(ln.pair)
        if ln.g < 0:
            sign.append((idx, ln.pair, "g", ln.g))
        if ln.b > 0:
            sign.append((idx, ln.pair, "b", ln.b))
        if ln.closed and ln.y != 0:
            degree[ln.i] += 1
            degree[ln.k] += 1
    ncomp, labels = components(net)
    dangling = [int(i) for i in np.flatnonzero(degree == 0)] if net.n > 1 else []
    return Diagnostics(ncomp <= 1, int(ncomp), labels, sign, dangling, dup)


# -- JSON ------------------------------------------------------------------

def network_to_dict(net: Network, params: InterfaceParams | None = None) -> dict:
    out = {
        "nodes": [
            {
                "id": nd.id,
                "kind": nd.kind,
                "voltage": nd.voltage,
                "shunt": {"g": nd.shunt.real, "b": nd.shunt.imag},
            }
            for nd in net.nodes
        ],
        "lines": [
            {"i": ln.i, "k": ln.k, "g": ln.g, "b": ln.b, "status": ln.status}
            for ln in net.lines
        ],
        "base": dict(net.base),
    }
    if net.names:
        out["names"] = {str(k): v for k, v in net.names.items()}
    if params is not None:
        out["interface"] = params_to_list(params)
    return out


def params_to_list(params: InterfaceParams) -> list[dict]:
    return [
        {"id": i, "m": float(m), "d": float(d), "p_set": float(p)}
        for i, m, d, p in zip(params.ids, params.m, params.d, params.p_set)
    ]


def params_from_list(items: list[dict]) -> InterfaceParams:
    items = sorted(items, key=lambda r: int(r["id"]))
    return InterfaceParams(
        tuple(int(r["id"]) for r in items),
        [float(r["m"]) for r in items],
        [float(r["d"]) for r in items],
        [float(r.get("p_set", 0.0)) for r in items],
    )


def network_from_dict(data: dict) -> tuple[Network, InterfaceParams | None]:
    nodes = []
    for r in sorted(data["nodes"], key=lambda r: int(r["id"])):
        sh = r.get("shunt") or {}
        nodes.append(
            Node(
                int(r["id"]),
                r.get("kind", ACTIVE),
                float(r.get("voltage", 1.0)),
                complex(float(sh.get("g", 0.0)), float(sh.get("b", 0.0))),
            )
        )
    lines = [
        Line(int(r["i"]), int(r["k"]), float(r.get("g", 0.0)), float(r["b"]), r.get("status", CLOSED))
        for r in data.get("lines", [])
    ]
    base = data.get("base", {"p_mw": 100.0, "v_kv": 1.0})
    names = {int(k): v for k, v in data.get("names", {}).items()}
    params = params_from_list(data["interface"]) if data.get("interface") else None
    return Network(tuple(nodes), tuple(lines), base, names), params


def dumps_network(net: Network, params: InterfaceParams | None = None) -> str:
    return json.dumps(network_to_dict(net, params), indent=2, sort_keys=True)


def load_network(path) -> tuple[Network, InterfaceParams | None]:
    with open(path, encoding="utf-8") as fh:
        return network_from_dict(json.load(fh))


def save_network(path, net: Network, params: InterfaceParams | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_network(net, params))
        fh.write("\n")
