"""
Spin-network graphs and builders.

A network is a set of labelled spins with signed XY couplings on its edges and
a local field on every node. Node order is insertion order, which fixes the
matrix index of every spin in the single-excitation sector.

Label grammar
-------------
    (a,b)            tree node, column a, row b
    (a,b)/aux        auxiliary spin paired with tree node (a,b)
    link:<k>         singlet-link spin
    T<i>:<label>     tree-instance prefix used in concatenated networks
"""

from __future__ import annotations

import json
import math
import re
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping, NamedTuple, Sequence

__all__ = [
    "Edge",
    "NetworkSpec",
    "NodeLabel",
    "Wiring",
    "attach_sender_aux",
    "attach_singlet_link",
    "build_binary_tree",
    "build_bt2_aux",
    "build_modified_bt2",
    "concatenate_trees",
    "format_label",
    "link_ports",
    "parse_label",
    "tree_label",
]


# --------------------------------------------------------------------------
# Labels
# --------------------------------------------------------------------------

_TREE_RE = re.compile(r"^(?:T(?P<tree>\d+):)?\((?P<a>\d+),(?P<b>\d+)\)(?P<aux>/aux)?$")
_LINK_RE = re.compile(r"^link:(?P<k>\d+)$")


@dataclass(frozen=True)
class NodeLabel:
    """Parsed form of a canonical node label.

    Tree nodes carry ``a``/``b`` (and optionally ``tree`` and ``aux``); link
    spins carry only ``link``.
    """

    a: int | None = None
    b: int | None = None
    aux: bool = False
    tree: int | None = None
    link: int | None = None

    @property
    def is_link(self) -> bool:
        return self.link is not None


def format_label(label: NodeLabel) -> str:
    if label.is_link:
        return f"link:{label.link}"
    text = f"({label.a},{label.b})"
    if label.aux:
        text += "/aux"
    if label.tree is not None:
        text = f"T{label.tree}:{text}"
    return text


def parse_label(text: str) -> NodeLabel:
    m = _LINK_RE.match(text)
    if m:
        return NodeLabel(link=int(m["k"]))
    m = _TREE_RE.match(text)
    if not m:
        raise ValueError(f"not a canonical node label: {text!r}")
    tree = int(m["tree"]) if m["tree"] is not None else None
    return NodeLabel(a=int(m["a"]), b=int(m["b"]), aux=m["aux"] is not None, tree=tree)


def tree_label(a: int, b: int, aux: bool = False, tree: int | None = None) -> str:
    return format_label(NodeLabel(a=a, b=b, aux=aux, tree=tree))


def _aux_of(site: str) -> str:
    return site + "/aux"


# --------------------------------------------------------------------------
# Network
# --------------------------------------------------------------------------


class Edge(NamedTuple):
    a: str
    b: str
    j: float


@dataclass(frozen=True)
class NetworkSpec:
    """Immutable XY spin network.

    ``omegas[i]`` is the local field of ``nodes[i]``. Construction validates
    labels, endpoints and couplings; any violation raises ``ValueError``.
    """

    nodes: tuple[str, ...]
    edges: tuple[Edge, ...]
    omegas: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(Edge(a, b, float(j)) for a, b, j in self.edges))
        object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        if len(self.omegas) != len(self.nodes):
            raise ValueError("one local field per node is required")
        if len(set(self.nodes)) != len(self.nodes):
            dupes = sorted({n for n in self.nodes if self.nodes.count(n) > 1})
            raise ValueError(f"duplicate node labels: {dupes}")
        if any(not math.isfinite(w) for w in self.omegas):
            raise ValueError("local fields must be finite")
        known = set(self.nodes)
        pairs = set()
        for a, b, j in self.edges:
            if a not in known or b not in known:
                raise ValueError(f"edge ({a}, {b}) references an unknown node")
            if a == b:
                raise ValueError(f"self-edge on {a}")
            if j == 0.0 or not math.isfinite(j):
                raise ValueError(f"edge ({a}, {b}) needs a finite nonzero coupling, got {j}")
            key = frozenset((a, b))
            if key in pairs:
                raise ValueError(f"duplicate edge between {a} and {b}")
            pairs.add(key)

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def fields(self) -> dict[str, float]:
        return dict(zip(self.nodes, self.omegas))

    def index(self, label: str) -> int:
        try:
            return self.nodes.index(label)
        except ValueError:
            raise ValueError(f"unknown node {label!r}") from None

    def __contains__(self, label: object) -> bool:
        return label in self.nodes

    def neighbors(self, label: str) -> dict[str, float]:
        out = {}
        for a, b, j in self.edges:
            if a == label:
                out[b] = j
            elif b == label:
                out[a] = j
        return out

    def degree(self, label: str) -> int:
        return len(self.neighbors(label))

    def coupling(self, a: str, b: str) -> float:
        """Coupling between two nodes, 0.0 when they share no edge."""
        return self.neighbors(a).get(b, 0.0)

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        adj = defaultdict(set)
        for a, b, _ in self.edges:
            adj[a].add(b)
            adj[b].add(a)
        seen = {self.nodes[0]}
        stack = [self.nodes[0]]
        while stack:
            for nxt in adj[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        return len(seen) == len(self.nodes)

    # -- composition ------------------------------------------------------

    def with_node(self, label: str, omega: float, couplings: Mapping[str, float]) -> NetworkSpec:
        if label in self.nodes:
            raise ValueError(f"node {label!r} already present")
        for other in couplings:
            if other not in self.nodes:
                raise ValueError(f"cannot couple {label!r} to unknown node {other!r}")
        new_edges = tuple(Edge(label, other, j) for other, j in couplings.items())
        return NetworkSpec(self.nodes + (label,), self.edges + new_edges, self.omegas + (omega,))

    def prefixed(self, prefix: str) -> NetworkSpec:
        return NetworkSpec(
            tuple(prefix + n for n in self.nodes),
            tuple(Edge(prefix + a, prefix + b, j) for a, b, j in self.edges),
            self.omegas,
        )

    # -- serialisation ----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "nodes": [{"id": n, "omega": w} for n, w in zip(self.nodes, self.omegas)],
            "edges": [{"a": a, "b": b, "j": j} for a, b, j in self.edges],
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> NetworkSpec:
        try:
            nodes = [(str(n["id"]), float(n["omega"])) for n in doc["nodes"]]
            edges = [Edge(str(e["a"]), str(e["b"]), float(e["j"])) for e in doc.get("edges", [])]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed network document: {exc}") from exc
        return cls(tuple(n for n, _ in nodes), tuple(edges), tuple(w for _, w in nodes))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> NetworkSpec:
        return cls.from_dict(json.loads(text))


def _merge(nets: Iterable[NetworkSpec]) -> NetworkSpec:
    nodes: tuple[str, ...] = ()
    edges: tuple[Edge, ...] = ()
    omegas: tuple[float, ...] = ()
    for net in nets:
        nodes += net.nodes
        edges += net.edges
        omegas += net.omegas
    return NetworkSpec(nodes, edges, omegas)


# --------------------------------------------------------------------------
# Builders
# --------------------------------------------------------------------------


def build_binary_tree(order: int, j0: float, omega: float) -> NetworkSpec:
    """Entry pair (0,0)-(0,1) followed by ``order`` bifurcating columns."""
    if int(order) != order or order < 1:
        raise ValueError(f"tree order must be a positive integer, got {order}")
    if j0 == 0:
        raise ValueError("j0 must be nonzero")
    nodes = ["(0,0)", "(0,1)"]
    edges = [Edge("(0,0)", "(0,1)", j0)]
    for b in (1, 2):
        edges.append(Edge("(0,1)", tree_label(1, b), j0))
    for a in range(1, order + 1):
        for b in range(1, 2**a + 1):
            nodes.append(tree_label(a, b))
            if a < order:
                edges.append(Edge(tree_label(a, b), tree_label(a + 1, 2 * b - 1), j0))
                edges.append(Edge(tree_label(a, b), tree_label(a + 1, 2 * b), j0))
    return NetworkSpec(tuple(nodes), tuple(edges), (omega,) * len(nodes))


def attach_sender_aux(net: NetworkSpec, j0: float, omega: float) -> NetworkSpec:
    """Add ``(0,0)/aux`` coupled only to (0,1), mirroring (0,0)."""
    for required in ("(0,0)", "(0,1)"):
        if required not in net:
            raise ValueError(f"network has no {required} node")
    return net.with_node(_aux_of("(0,0)"), omega, {"(0,1)": j0})


def build_bt2_aux(j0: float, omega: float) -> NetworkSpec:
    return attach_sender_aux(build_binary_tree(2, j0, omega), j0, omega)


def build_modified_bt2(j0: float, omega: float) -> NetworkSpec:
    """Order-2 tree with auxiliaries on the sender and on every leaf.

    Leaf auxiliaries hang off the same parent as their leaf, and every
    column-1 to column-2 coupling is scaled by 1/sqrt(2) so the triplet
    chain keeps a uniform coupling sqrt(2)*j0.
    """
    if j0 == 0:
        raise ValueError("j0 must be nonzero")
    base = build_bt2_aux(j0, omega)
    scaled = j0 / math.sqrt(2.0)
    edges = [
        Edge(a, b, scaled if parse_label(b).a == 2 else j)
        for a, b, j in base.edges
    ]
    nodes = list(base.nodes)
    for b in range(1, 5):
        leaf = tree_label(2, b)
        nodes.append(_aux_of(leaf))
        edges.append(Edge(tree_label(1, (b + 1) // 2), _aux_of(leaf), scaled))
    return NetworkSpec(tuple(nodes), tuple(edges), (omega,) * len(nodes))


def attach_singlet_link(
    net: NetworkSpec,
    out_site: str,
    out_aux: str,
    in_site: str,
    in_aux: str,
    j: float,
    omega: float,
    link_label: str,
) -> NetworkSpec:
    """One spin coupled +j/-j to each (site, aux) port pair.

    The opposite signs make the spin see only the port singlets, each with
    strength sqrt(2)*j; port triplets are left untouched.
    """
    if j == 0:
        raise ValueError("link coupling must be nonzero")
    sites = (out_site, out_aux, in_site, in_aux)
    if len(set(sites)) != 4:
        raise ValueError("link ports must be four distinct nodes")
    return net.with_node(link_label, omega, {out_site: j, out_aux: -j, in_site: j, in_aux: -j})


class Wiring(NamedTuple):
    """Output leaf ``leaf`` of tree ``src`` feeds the input of tree ``dst``."""

    src: int
    leaf: int
    dst: int


def _check_wiring(wirings: Sequence[Wiring]) -> list[int]:
    if not wirings:
        raise ValueError("at least one wiring is required")
    ports = set()
    fed = set()
    adj = defaultdict(list)
    trees = set()
    for w in wirings:
        if w.leaf not in (1, 2, 3, 4):
            raise ValueError(f"leaf index must be in 1..4, got {w.leaf}")
        if min(w.src, w.dst) < 0:
            raise ValueError("tree ids must be nonnegative")
        if (w.src, w.leaf) in ports:
            raise ValueError(f"output port {w.leaf} of tree {w.src} wired twice")
        if w.dst in fed:
            raise ValueError(f"input of tree {w.dst} wired twice")
        ports.add((w.src, w.leaf))
        fed.add(w.dst)
        adj[w.src].append(w.dst)
        trees.update((w.src, w.dst))

    # iterative DFS colouring for cycle detection
    state = dict.fromkeys(trees, 0)
    for start in sorted(trees):
        if state[start]:
            continue
        stack = [(start, iter(adj[start]))]
        state[start] = 1
        while stack:
            node, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[node] = 2
                stack.pop()
            elif state[nxt] == 1:
                raise ValueError("tree wiring contains a cycle")
            elif state[nxt] == 0:
                state[nxt] = 1
                stack.append((nxt, iter(adj[nxt])))
    return sorted(trees)


def concatenate_trees(
    wirings: Sequence[Wiring | tuple[int, int, int]],
    j0: float,
    omega: float,
    link_j: float | None = None,
) -> NetworkSpec:
    """Modified order-2 trees joined output-to-input by singlet links.

    Link ``k`` realises ``wirings[k]``. The link coupling defaults to ``j0``.
    """
    wirings = [Wiring(*w) for w in wirings]
    trees = _check_wiring(wirings)
    tree = build_modified_bt2(j0, omega)
    net = _merge(tree.prefixed(f"T{i}:") for i in trees)
    j = j0 if link_j is None else link_j
    for k, w in enumerate(wirings):
        out_site = tree_label(2, w.leaf, tree=w.src)
        in_site = tree_label(0, 0, tree=w.dst)
        net = attach_singlet_link(
            net, out_site, _aux_of(out_site), in_site, _aux_of(in_site), j, omega, f"link:{k}"
        )
    return net


def _column(label: str) -> int:
    try:
        return parse_label(label).a or 0
    except ValueError:
        return 0


def link_ports(net: NetworkSpec, link: str) -> tuple[tuple[str, str], tuple[str, str]]:
    """Return ``((out_site, out_aux), (in_site, in_aux))`` joined by a link spin.

    The output pair is the one sitting on a leaf column (a > 0); without
    column information the attachment order decides.
    """
    nbrs = net.neighbors(link)
    sites = [n for n in nbrs if not n.endswith("/aux")]
    if len(nbrs) != 4 or len(sites) != 2 or any(_aux_of(s) not in nbrs for s in sites):
        raise ValueError(f"{link!r} is not a singlet link between two (site, aux) pairs")
    for s in sites:
        if not (nbrs[s] == -nbrs[_aux_of(s)] and nbrs[s] != 0):
            raise ValueError(f"{link!r} couplings to {s} and its aux are not opposite")
    sites.sort(key=lambda s: -_column(s))
    out_site, in_site = sites
    return (out_site, _aux_of(out_site)), (in_site, _aux_of(in_site))
