"""Exact calculus on discrete causal graphs.

Factorization of a Bayes net into a full joint table, point interventions
by factor truncation, d-separation via moralized reachability, back-door
admissibility and adjustment, Markov blankets, and bit-valued entropy /
mutual information — all by exact enumeration, sized for verification
rather than scale.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import PositivityError, TableTooLargeError
from .graph import DirectedGraph, descendants, is_dag

__all__ = [
    "MAX_TABLE_ENTRIES",
    "DiscreteBayesNet",
    "JointTable",
    "joint",
    "intervene",
    "d_separated",
    "backdoor_satisfies",
    "backdoor_adjust",
    "markov_blanket",
    "entropy",
    "conditional_entropy",
    "mutual_information",
    "FeatureSelection",
    "select_features",
    "net_to_dict",
    "net_from_dict",
    "save_net",
    "load_net",
]

MAX_TABLE_ENTRIES = 2**20


@dataclass(frozen=True)
class DiscreteBayesNet:
    """DAG plus one conditional probability table per variable.

    CPT rows are keyed by parent assignments: a tuple of values aligned
    with the variable's parents in sorted name order.
    """

    graph: DirectedGraph
    cardinalities: Mapping[str, int]
    cpts: Mapping[str, Mapping[tuple[int, ...], tuple[float, ...]]]

    def __post_init__(self):
        if not is_dag(self.graph):
            raise ValueError("net graph must be a DAG")
        nodes = set(self.graph.nodes)
        if set(self.cardinalities) != nodes:
            raise ValueError("cardinalities must cover exactly the node set")
        if set(self.cpts) != nodes:
            raise ValueError("cpts must cover exactly the node set")
        for var in self.graph.nodes:
            card = self.cardinalities[var]
            if card < 2:
                raise ValueError(f"cardinality of {var!r} must be >= 2")
            parents = self.parent_order(var)
            expected = set(
                itertools.product(*(range(self.cardinalities[p]) for p in parents))
            )
            rows = self.cpts[var]
            if set(rows) != expected:
                raise ValueError(
                    f"CPT of {var!r} must enumerate each parent assignment once"
                )
            for assignment, dist in rows.items():
                if len(dist) != card:
                    raise ValueError(
                        f"CPT row {var!r}{assignment} must have {card} entries"
                    )
                if any(p < 0 for p in dist):
                    raise ValueError(f"CPT row {var!r}{assignment} has negatives")
                if abs(sum(dist) - 1.0) > 1e-12:
                    raise ValueError(f"CPT row {var!r}{assignment} must sum to 1")

    def parent_order(self, var: str) -> list[str]:
        return sorted(self.graph.parents(var))


@dataclass(frozen=True)
class JointTable:
    """Full joint distribution as an n-dimensional array."""

    variables: tuple[str, ...]
    cardinalities: tuple[int, ...]
    probs: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "probs", np.asarray(self.probs, dtype=float))
        if self.probs.shape != tuple(self.cardinalities):
            raise ValueError("probs shape must match cardinalities")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be nonnegative")
        if abs(float(self.probs.sum()) - 1.0) > 1e-9:
            raise ValueError("total mass must be 1")

    def index(self, var: str) -> int:
        try:
            return self.variables.index(var)
        except ValueError:
            raise ValueError(f"unknown variable {var!r}") from None

    def probability(self, assignment: Mapping[str, int]) -> float:
        if set(assignment) != set(self.variables):
            raise ValueError("assignment must cover every variable")
        idx = tuple(assignment[v] for v in self.variables)
        return float(self.probs[idx])

    def marginal_array(self, variables: Sequence[str]) -> np.ndarray:
        """Marginal over the given variables, axes in the given order."""
        variables = list(variables)
        if len(set(variables)) != len(variables):
            raise ValueError("duplicate variables in marginal request")
        keep = [self.index(v) for v in variables]
        drop = tuple(i for i in range(len(self.variables)) if i not in keep)
        arr = self.probs.sum(axis=drop) if drop else self.probs
        kept_order = [i for i in range(len(self.variables)) if i not in drop]
        perm = [kept_order.index(i) for i in keep]
        return np.transpose(arr, perm) if perm else arr

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return {
            tuple(int(i) for i in idx): float(self.probs[idx])
            for idx in np.ndindex(*self.cardinalities)
        }


def _factor(net: DiscreteBayesNet, var: str) -> tuple[list[str], np.ndarray]:
    parents = net.parent_order(var)
    shape = [net.cardinalities[p] for p in parents] + [net.cardinalities[var]]
    arr = np.empty(shape, dtype=float)
    for assignment in itertools.product(
        *(range(net.cardinalities[p]) for p in parents)
    ):
        arr[assignment] = net.cpts[var][assignment]
    return parents + [var], arr


def _product_table(
    net: DiscreteBayesNet,
    override: Mapping[str, np.ndarray] | None = None,
    max_entries: int = MAX_TABLE_ENTRIES,
) -> JointTable:
    variables = net.graph.nodes
    cards = tuple(net.cardinalities[v] for v in variables)
    size = math.prod(cards)
    if size > max_entries:
        raise TableTooLargeError(
            f"joint table needs {size} entries; cap is {max_entries}"
        )
    position = {v: i for i, v in enumerate(variables)}
    probs = np.ones(cards, dtype=float)
    for var in variables:
        if override is not None and var in override:
            involved, arr = [var], override[var]
        else:
            involved, arr = _factor(net, var)
        order = np.argsort([position[v] for v in involved])
        arr = np.transpose(arr, order)
        involved_set = set(involved)
        shape = tuple(
            net.cardinalities[v] if v in involved_set else 1 for v in variables
        )
        probs = probs * arr.reshape(shape)
    return JointTable(variables, cards, probs)


def joint(net: DiscreteBayesNet, max_entries: int = MAX_TABLE_ENTRIES) -> JointTable:
    """Exact joint distribution: the product of every CPT factor."""
    return _product_table(net, max_entries=max_entries)


def intervene(
    net: DiscreteBayesNet,
    variable: str,
    value: int,
    max_entries: int = MAX_TABLE_ENTRIES,
) -> JointTable:
    """Truncated factorization: the intervened variable's factor becomes a
    point mass, severing the influence of its natural parents."""
    if variable not in net.cardinalities:
        raise ValueError(f"unknown variable {variable!r}")
    card = net.cardinalities[variable]
    if not 0 <= value < card:
        raise ValueError(f"value {value} out of range for {variable!r}")
    point = np.zeros(card, dtype=float)
    point[value] = 1.0
    return _product_table(net, override={variable: point}, max_entries=max_entries)


# --- graphical criteria -----------------------------------------------------


def _check_query_sets(
    g: DirectedGraph, X: Iterable[str], Y: Iterable[str], Z: Iterable[str]
) -> tuple[set[str], set[str], set[str]]:
    X, Y, Z = set(X), set(Y), set(Z)
    nodes = set(g.nodes)
    for name, group in (("X", X), ("Y", Y), ("Z", Z)):
        unknown = group - nodes
        if unknown:
            raise ValueError(f"{name} contains unknown nodes {sorted(unknown)}")
    if X & Y or X & Z or Y & Z:
        raise ValueError("X, Y, Z must be pairwise disjoint")
    if not X or not Y:
        raise ValueError("X and Y must be non-empty")
    return X, Y, Z


def d_separated(
    g: DirectedGraph, X: Iterable[str], Y: Iterable[str], Z: Iterable[str]
) -> bool:
    """Moralized-ancestral-graph reachability.

    Restrict to ancestors of X ∪ Y ∪ Z, marry co-parents, drop directions,
    delete Z; X and Y are d-separated exactly when no undirected path
    survives.
    """
    if not is_dag(g):
        raise ValueError("d-separation is defined on DAGs")
    X, Y, Z = _check_query_sets(g, X, Y, Z)

    relevant = X | Y | Z
    closure = set(relevant)
    preds = g.predecessors()
    frontier = list(relevant)
    while frontier:
        node = frontier.pop()
        for parent in preds[node]:
            if parent not in closure:
                closure.add(parent)
                frontier.append(parent)

    neighbours: dict[str, set[str]] = {n: set() for n in closure}
    for e in g.edges:
        if e.src in closure and e.dst in closure:
            neighbours[e.src].add(e.dst)
            neighbours[e.dst].add(e.src)
    for node in closure:
        parents = [p for p in preds[node] if p in closure]
        for a, b in itertools.combinations(parents, 2):
            neighbours[a].add(b)
            neighbours[b].add(a)

    seen = set(X)
    frontier = list(X)
    while frontier:
        node = frontier.pop()
        for nxt in neighbours[node]:
            if nxt in Z or nxt in seen:
                continue
            if nxt in Y:
                return False
            seen.add(nxt)
            frontier.append(nxt)
    return True


def backdoor_satisfies(
    g: DirectedGraph, Z: Iterable[str], X: str, Y: str
) -> bool:
    """Back-door admissibility of Z for the effect of X on Y.

    Z may contain no descendant of X, and must block every path into X
    (checked by d-separation after deleting X's outgoing edges).
    """
    if not is_dag(g):
        raise ValueError("back-door criterion is defined on DAGs")
    if X == Y:
        raise ValueError("X and Y must differ")
    Z = set(Z)
    if X in Z or Y in Z:
        raise ValueError("Z must not contain X or Y")
    if Z & descendants(g, X):
        return False
    stripped = DirectedGraph(
        g.nodes,
        tuple(e for e in g.edges if e.src != X),
        dict(g.descriptions),
    )
    return d_separated(stripped, {X}, {Y}, Z)


def backdoor_adjust(
    net: DiscreteBayesNet,
    X: str,
    x: int,
    Y: str,
    Z: Iterable[str],
) -> list[float]:
    """P(y | do(x)) by adjustment: sum over z of P(y | x, z) P(z)."""
    Z = sorted(set(Z))
    if not backdoor_satisfies(net.graph, Z, X, Y):
        raise ValueError(f"{Z} fails the back-door criterion for ({X}, {Y})")
    if not 0 <= x < net.cardinalities[X]:
        raise ValueError(f"value {x} out of range for {X!r}")
    table = joint(net)
    card_y = net.cardinalities[Y]

    p_z = table.marginal_array(Z) if Z else np.array(1.0)
    p_xyz = table.marginal_array([X, Y] + Z)  # axes: X, Y, *Z
    result = np.zeros(card_y, dtype=float)
    z_shapes = [net.cardinalities[v] for v in Z]
    for z_idx in np.ndindex(*z_shapes) if Z else [()]:
        mass_z = float(p_z[z_idx]) if Z else 1.0
        if mass_z <= 0.0:
            continue
        slice_xz = p_xyz[(x, slice(None)) + z_idx]  # distribution over Y, unnormalized
        mass_xz = float(slice_xz.sum())
        if mass_xz <= 0.0:
            offending = dict(zip(Z, z_idx))
            raise PositivityError(
                f"P({X}={x}, z)=0 for z={offending} with P(z)>0; "
                "adjustment conditional undefined"
            )
        result += (slice_xz / mass_xz) * mass_z
    return [float(v) for v in result]


def markov_blanket(g: DirectedGraph, Y: str) -> set[str]:
    """Parents, children, and co-parents of the target's children."""
    if not is_dag(g):
        raise ValueError("Markov blanket is defined on DAGs")
    if Y not in g.nodes:
        raise ValueError(f"unknown node {Y!r}")
    blanket = g.parents(Y) | g.children(Y)
    for child in g.children(Y):
        blanket |= g.parents(child)
    blanket.discard(Y)
    return blanket


# --- information measures ----------------------------------------------------


def entropy(table: JointTable, A: Iterable[str]) -> float:
    """Shannon entropy of a marginal, in bits; H(∅) = 0."""
    A = sorted(set(A))
    if not A:
        return 0.0
    marginal = table.marginal_array(A).ravel()
    positive = marginal[marginal > 0]
    return float(-(positive * np.log2(positive)).sum())


def conditional_entropy(table: JointTable, Y: str, given: Iterable[str]) -> float:
    """H(Y | C) = H(Y, C) - H(C), in bits."""
    given = set(given)
    if Y in given:
        raise ValueError("conditioning set must not contain the target")
    return entropy(table, given | {Y}) - entropy(table, given)


def mutual_information(table: JointTable, A: Iterable[str], Y: str) -> float:
    """I(A; Y) = H(Y) - H(Y | A), in bits; never negative."""
    A = set(A)
    if Y in A:
        raise ValueError("A must not contain Y")
    value = entropy(table, {Y}) - conditional_entropy(table, Y, A)
    return max(0.0, value)


# --- feature selection --------------------------------------------------------


@dataclass(frozen=True)
class FeatureSelection:
    """Markov-blanket features plus the audit of excluded downstream nodes."""

    target: str
    features: frozenset[str]
    excluded_descendants: tuple[str, ...]


def select_features(g: DirectedGraph, target: str) -> FeatureSelection:
    """The target's Markov blanket, with descendants outside it called out.

    Downstream-only variables predict the target in-sample but break under
    intervention, so their exclusion is reported explicitly.
    """
    blanket = markov_blanket(g, target)
    excluded = tuple(sorted(descendants(g, target) - blanket))
    return FeatureSelection(
        target=target, features=frozenset(blanket), excluded_descendants=excluded
    )


# --- JSON interchange ----------------------------------------------------------


def net_to_dict(net: DiscreteBayesNet) -> dict:
    cpts = {}
    for var in net.graph.nodes:
        parents = net.parent_order(var)
        rows = []
        for assignment in sorted(net.cpts[var]):
            rows.append(
                {
                    "parents": dict(zip(parents, (int(v) for v in assignment))),
                    "dist": [float(p) for p in net.cpts[var][assignment]],
                }
            )
        cpts[var] = rows
    return {
        "cardinalities": {v: int(net.cardinalities[v]) for v in net.graph.nodes},
        "edges": [[e.src, e.dst] for e in net.graph.edges],
        "cpts": cpts,
    }


def net_from_dict(payload: Mapping) -> DiscreteBayesNet:
    from .graph import DirectedEdge

    try:
        cardinalities = {str(k): int(v) for k, v in payload["cardinalities"].items()}
        nodes = tuple(sorted(cardinalities))
        edges = tuple(
            DirectedEdge(src=str(src), dst=str(dst)) for src, dst in payload["edges"]
        )
        graph = DirectedGraph(nodes, edges)
        cpts: dict[str, dict[tuple[int, ...], tuple[float, ...]]] = {}
        for var, rows in payload["cpts"].items():
            parents = sorted(graph.parents(var))
            table: dict[tuple[int, ...], tuple[float, ...]] = {}
            for row in rows:
                assignment = tuple(int(row["parents"][p]) for p in parents)
                table[assignment] = tuple(float(p) for p in row["dist"])
            cpts[var] = table
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed net payload: {exc}") from exc
    return DiscreteBayesNet(graph=graph, cardinalities=cardinalities, cpts=cpts)


def save_net(net: DiscreteBayesNet, path: str | Path) -> None:
    Path(path).write_text(json.dumps(net_to_dict(net), indent=2) + "\n")


def load_net(path: str | Path) -> DiscreteBayesNet:
    return net_from_dict(json.loads(Path(path).read_text()))
