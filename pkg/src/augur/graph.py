"""Directed causal graphs: cycle critiques, modifications, refinement.

Graphs are immutable values. Every mutation-shaped operation returns a new
graph. The refinement loop repairs cycles one modification at a time,
consulting a pluggable fixer while a deterministic weakest-edge fallback
guarantees termination.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from .errors import (
    OutOfCycleError,
    ReversalConflictError,
    StaleModificationError,
)

__all__ = [
    "DirectedEdge",
    "DirectedGraph",
    "Critique",
    "GraphModification",
    "RefinementStep",
    "is_dag",
    "topological_sort",
    "ancestors",
    "descendants",
    "find_critiques",
    "apply_modification",
    "refine",
    "graph_to_dict",
    "graph_from_dict",
    "save_graph",
    "load_graph",
    "log_to_dicts",
    "log_from_dicts",
    "to_dot",
]

Edge = tuple[str, str]


@dataclass(frozen=True)
class DirectedEdge:
    """Ordered pair with optional judgment annotations."""

    src: str
    dst: str
    label: str | None = None
    confidence: float | None = None
    correlation: float | None = None

    def __post_init__(self):
        if self.src == self.dst:
            raise ValueError(f"self-loop {self.src!r} is not allowed")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError("confidence must lie in [0, 1]")

    @property
    def pair(self) -> Edge:
        return (self.src, self.dst)


@dataclass(frozen=True)
class DirectedGraph:
    """Immutable directed graph over named nodes."""

    nodes: tuple[str, ...]
    edges: tuple[DirectedEdge, ...] = ()
    descriptions: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(self.edges))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        node_set = set(self.nodes)
        seen: set[Edge] = set()
        for e in self.edges:
            if e.src not in node_set or e.dst not in node_set:
                raise ValueError(f"edge endpoint outside node set: {e.src}->{e.dst}")
            if e.pair in seen:
                raise ValueError(f"duplicate edge {e.src}->{e.dst}")
            seen.add(e.pair)
        for name in self.descriptions:
            if name not in node_set:
                raise ValueError(f"description for unknown node {name!r}")

    # --- queries -------------------------------------------------------

    @property
    def edge_pairs(self) -> frozenset[Edge]:
        return frozenset(e.pair for e in self.edges)

    def has_edge(self, src: str, dst: str) -> bool:
        return (src, dst) in self.edge_pairs

    def edge(self, src: str, dst: str) -> DirectedEdge:
        for e in self.edges:
            if e.src == src and e.dst == dst:
                return e
        raise KeyError(f"no edge {src}->{dst}")

    def parents(self, node: str) -> set[str]:
        self._check_node(node)
        return {e.src for e in self.edges if e.dst == node}

    def children(self, node: str) -> set[str]:
        self._check_node(node)
        return {e.dst for e in self.edges if e.src == node}

    def successors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.src].append(e.dst)
        for lst in adj.values():
            lst.sort()
        return adj

    def predecessors(self) -> dict[str, list[str]]:
        adj: dict[str, list[str]] = {n: [] for n in self.nodes}
        for e in self.edges:
            adj[e.dst].append(e.src)
        for lst in adj.values():
            lst.sort()
        return adj

    def description(self, node: str) -> str:
        self._check_node(node)
        return self.descriptions.get(node, "")

    def _check_node(self, node: str) -> None:
        if node not in self.nodes:
            raise ValueError(f"unknown node {node!r}")

    # --- structural edits (return new graphs) --------------------------

    def with_edge(self, edge: DirectedEdge) -> DirectedGraph:
        return DirectedGraph(self.nodes, self.edges + (edge,), dict(self.descriptions))

    def without_edge(self, src: str, dst: str) -> DirectedGraph:
        if not self.has_edge(src, dst):
            raise StaleModificationError(f"edge {src}->{dst} not present")
        kept = tuple(e for e in self.edges if e.pair != (src, dst))
        return DirectedGraph(self.nodes, kept, dict(self.descriptions))

    def with_edge_reversed(self, src: str, dst: str) -> DirectedGraph:
        if not self.has_edge(src, dst):
            raise StaleModificationError(f"edge {src}->{dst} not present")
        if self.has_edge(dst, src):
            raise ReversalConflictError(
                f"cannot reverse {src}->{dst}: {dst}->{src} already present"
            )
        edges = tuple(
            replace(e, src=e.dst, dst=e.src) if e.pair == (src, dst) else e
            for e in self.edges
        )
        return DirectedGraph(self.nodes, edges, dict(self.descriptions))


@dataclass(frozen=True)
class Critique:
    """A structural violation: an ordered closed walk of offending edges."""

    kind: str  # cycle | two_cycle | self_loop
    edges: tuple[Edge, ...]

    def __post_init__(self):
        if self.kind not in ("cycle", "two_cycle", "self_loop"):
            raise ValueError(f"unknown critique kind {self.kind!r}")
        if len(self.edges) < 1:
            raise ValueError("critique needs at least one edge")
        for (a, b), (c, _) in zip(self.edges, self.edges[1:]):
            if b != c:
                raise ValueError("critique edges must chain head-to-tail")
        if self.edges[-1][1] != self.edges[0][0]:
            raise ValueError("critique edges must close the walk")


@dataclass(frozen=True)
class GraphModification:
    """One repair step: delete or flip a single existing edge."""

    kind: str  # remove_edge | reverse_edge
    edge: Edge
    justification: str = ""

    def __post_init__(self):
        if self.kind not in ("remove_edge", "reverse_edge"):
            raise ValueError(f"unknown modification kind {self.kind!r}")


@dataclass(frozen=True)
class RefinementStep:
    iteration: int
    critique: Critique
    modification: GraphModification
    source: str  # oracle | fallback

    def __post_init__(self):
        if self.source not in ("oracle", "fallback"):
            raise ValueError(f"unknown step source {self.source!r}")


RefinementLog = tuple[RefinementStep, ...]

CycleFixer = Callable[[DirectedGraph, Critique], GraphModification]


# --- acyclicity ---------------------------------------------------------


def topological_sort(nodes: Sequence[str], edges: Iterable[Edge]) -> list[str] | None:
    """Kahn's algorithm; None when a cycle prevents completion."""
    indegree = {n: 0 for n in nodes}
    succ: dict[str, list[str]] = {n: [] for n in nodes}
    for src, dst in edges:
        succ[src].append(dst)
        indegree[dst] += 1
    ready = sorted(n for n in nodes if indegree[n] == 0)
    order: list[str] = []
    while ready:
        node = ready.pop(0)
        order.append(node)
        for nxt in sorted(succ[node]):
            indegree[nxt] -= 1
            if indegree[nxt] == 0:
                ready.append(nxt)
        ready.sort()
    return order if len(order) == len(indegree) else None


def is_dag(g: DirectedGraph) -> bool:
    return topological_sort(g.nodes, g.edge_pairs) is not None


def _reach(adjacency: dict[str, list[str]], start: str) -> set[str]:
    seen: set[str] = set()
    frontier = [start]
    while frontier:
        node = frontier.pop()
        for nxt in adjacency[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    seen.discard(start)
    return seen


def descendants(g: DirectedGraph, node: str) -> set[str]:
    """Proper descendants: nodes reachable along directed edges."""
    g._check_node(node)
    return _reach(g.successors(), node)


def ancestors(g: DirectedGraph, node: str) -> set[str]:
    """Proper ancestors: nodes that reach this one along directed edges."""
    g._check_node(node)
    return _reach(g.predecessors(), node)


# --- cycle critiques ----------------------------------------------------


def _strongly_connected_components(g: DirectedGraph) -> list[set[str]]:
    """Iterative Tarjan."""
    succ = g.successors()
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    components: list[set[str]] = []
    counter = 0

    for root in g.nodes:
        if root in index:
            continue
        work: list[tuple[str, int]] = [(root, 0)]
        while work:
            node, child_i = work[-1]
            if child_i == 0:
                index[node] = low[node] = counter
                counter += 1
                stack.append(node)
                on_stack.add(node)
            advanced = False
            children = succ[node]
            while child_i < len(children):
                child = children[child_i]
                child_i += 1
                if child not in index:
                    work[-1] = (node, child_i)
                    work.append((child, 0))
                    advanced = True
                    break
                if child in on_stack:
                    low[node] = min(low[node], index[child])
            if advanced:
                continue
            work.pop()
            if low[node] == index[node]:
                component = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.add(member)
                    if member == node:
                        break
                components.append(component)
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[node])
    return components


def _shortest_cycle_in(g: DirectedGraph, component: set[str]) -> tuple[Edge, ...]:
    """Shortest directed cycle confined to one SCC, deterministically chosen."""
    succ = {
        n: [m for m in neighbours if m in component]
        for n, neighbours in g.successors().items()
        if n in component
    }
    best: list[str] | None = None
    for start in sorted(component):
        parent: dict[str, str] = {}
        queue: deque[str] = deque([start])
        seen = {start}
        found: list[str] | None = None
        while queue and found is None:
            node = queue.popleft()
            for nxt in succ[node]:
                if nxt == start:
                    chain = [node]
                    cur = node
                    while cur != start:
                        cur = parent[cur]
                        chain.append(cur)
                    chain.reverse()  # start .. node along directed edges
                    found = chain
                    break
                if nxt not in seen:
                    seen.add(nxt)
                    parent[nxt] = node
                    queue.append(nxt)
        if found is not None and (best is None or len(found) < len(best)):
            best = found
    assert best is not None, "SCC with >= 2 nodes must contain a cycle"
    cycle_nodes = best
    return tuple(
        (cycle_nodes[i], cycle_nodes[(i + 1) % len(cycle_nodes)])
        for i in range(len(cycle_nodes))
    )


def find_critiques(g: DirectedGraph) -> list[Critique]:
    """Structural violations, deterministically ordered.

    Emits one two_cycle critique per mutual edge pair; every strongly
    connected component of >= 2 nodes without a mutual pair contributes its
    shortest cycle. Empty exactly when the graph is a DAG.
    """
    pairs = g.edge_pairs
    critiques: list[Critique] = []
    for component in _strongly_connected_components(g):
        if len(component) < 2:
            continue
        mutual = sorted(
            (a, b)
            for (a, b) in pairs
            if a in component and b in component and a < b and (b, a) in pairs
        )
        if mutual:
            for a, b in mutual:
                critiques.append(Critique("two_cycle", ((a, b), (b, a))))
        else:
            critiques.append(Critique("cycle", _shortest_cycle_in(g, component)))
    critiques.sort(key=lambda c: c.edges)
    return critiques


# --- modification & refinement -----------------------------------------


def apply_modification(g: DirectedGraph, m: GraphModification) -> DirectedGraph:
    """Apply one modification, preserving edge annotations."""
    src, dst = m.edge
    if m.kind == "remove_edge":
        return g.without_edge(src, dst)
    return g.with_edge_reversed(src, dst)


def _fallback_modification(g: DirectedGraph, critique: Critique) -> GraphModification:
    """Delete the weakest edge of the critique: smallest |correlation|
    (missing annotation counts as 0), ties to the lexicographically first pair."""

    def weight(pair: Edge) -> tuple[float, str, str]:
        rho = g.edge(*pair).correlation
        return (abs(rho) if rho is not None else 0.0, pair[0], pair[1])

    victim = min(critique.edges, key=weight)
    return GraphModification(
        "remove_edge", victim, justification="weakest correlation in cycle"
    )


def _resolves(g: DirectedGraph, critique: Critique, m: GraphModification) -> bool:
    """A proposal counts only if it targets the critique and leaves no cycle
    through the touched edge."""
    if m.edge not in critique.edges:
        return False
    if not g.has_edge(*m.edge):
        return False
    if m.kind == "remove_edge":
        return True
    src, dst = m.edge
    if g.has_edge(dst, src):
        return False
    candidate = g.with_edge_reversed(src, dst)
    # reversed edge is dst->src; it sits on a cycle iff src reaches dst
    succ = candidate.successors()
    frontier = [src]
    seen = {src}
    while frontier:
        node = frontier.pop()
        if node == dst:
            return False
        for nxt in succ[node]:
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return True


def refine(
    g0: DirectedGraph,
    fixer: CycleFixer | None = None,
    k_max: int = 8,
) -> tuple[DirectedGraph, RefinementLog]:
    """Repair cycles one modification per iteration until none remain.

    The fixer is consulted at most k_max times; a proposal that is invalid,
    touches an edge outside the critique, or fails to resolve it is replaced
    by the weakest-edge fallback for that iteration. Once the consultation
    budget is spent, the fallback (which always deletes an edge) finishes
    the job, so the loop runs at most k_max + |edges| iterations.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    g = g0
    steps: list[RefinementStep] = []
    consultations = 0
    iteration = 0
    while True:
        critiques = find_critiques(g)
        if not critiques:
            break
        iteration += 1
        critique = critiques[0]
        modification: GraphModification | None = None
        source = "fallback"
        if fixer is not None and consultations < k_max:
            consultations += 1
            try:
                proposal = fixer(g, critique)
            except Exception:
                proposal = None
            if proposal is not None and _resolves(g, critique, proposal):
                modification = proposal
                source = "oracle"
        if modification is None:
            modification = _fallback_modification(g, critique)
        g = apply_modification(g, modification)
        steps.append(RefinementStep(iteration, critique, modification, source))
    return g, tuple(steps)


# --- serialization ------------------------------------------------------


def graph_to_dict(g: DirectedGraph) -> dict:
    return {
        "nodes": [
            {"name": n, "description": g.descriptions.get(n, "")} for n in g.nodes
        ],
        "edges": [
            {
                "src": e.src,
                "dst": e.dst,
                "label": e.label,
                "confidence": e.confidence,
                "correlation": e.correlation,
            }
            for e in g.edges
        ],
    }


def graph_from_dict(payload: Mapping) -> DirectedGraph:
    try:
        nodes = tuple(item["name"] for item in payload["nodes"])
        descriptions = {
            item["name"]: item.get("description", "") for item in payload["nodes"]
        }
        edges = tuple(
            DirectedEdge(
                src=item["src"],
                dst=item["dst"],
                label=item.get("label"),
                confidence=item.get("confidence"),
                correlation=item.get("correlation"),
            )
            for item in payload["edges"]
        )
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed graph payload: {exc}") from exc
    return DirectedGraph(nodes, edges, descriptions)


def save_graph(g: DirectedGraph, path: str | Path) -> None:
    Path(path).write_text(json.dumps(graph_to_dict(g), indent=2) + "\n")


def load_graph(path: str | Path) -> DirectedGraph:
    return graph_from_dict(json.loads(Path(path).read_text()))


def log_to_dicts(log: RefinementLog) -> list[dict]:
    return [
        {
            "iteration": step.iteration,
            "critique": {
                "kind": step.critique.kind,
                "edges": [list(edge) for edge in step.critique.edges],
            },
            "modification": {
                "kind": step.modification.kind,
                "edge": list(step.modification.edge),
                "justification": step.modification.justification,
            },
            "source": step.source,
        }
        for step in log
    ]


def log_from_dicts(payload: Sequence[Mapping]) -> RefinementLog:
    steps = []
    for item in payload:
        critique = Critique(
            kind=item["critique"]["kind"],
            edges=tuple(tuple(edge) for edge in item["critique"]["edges"]),
        )
        modification = GraphModification(
            kind=item["modification"]["kind"],
            edge=tuple(item["modification"]["edge"]),
            justification=item["modification"].get("justification", ""),
        )
        steps.append(
            RefinementStep(item["iteration"], critique, modification, item["source"])
        )
    return tuple(steps)


def to_dot(g: DirectedGraph, name: str = "causal") -> str:
    """Graphviz rendering; edge labels carry hypothesis and correlation."""
    lines = [f"digraph {name} {{"]
    for node in g.nodes:
        desc = g.descriptions.get(node, "")
        label = f"{node}\\n{desc}" if desc else node
        lines.append(f'  "{node}" [label="{label}"];')
    for e in g.edges:
        parts = []
        if e.label:
            parts.append(e.label)
        if e.correlation is not None:
            parts.append(f"rho={e.correlation:+.2f}")
        attr = f' [label="{", ".join(parts)}"]' if parts else ""
        lines.append(f'  "{e.src}" -> "{e.dst}"{attr};')
    lines.append("}")
    return "\n".join(lines) + "\n"
