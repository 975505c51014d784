"""Shared helpers for the test suite.

Deliberately independent implementations (plain loops, no reuse of the
package's own algorithms) so they can serve as oracles.
"""

from __future__ import annotations

import itertools
from datetime import datetime, timedelta, timezone

import numpy as np

from augur.causal import DiscreteBayesNet
from augur.dataset import TimeSeriesWindow, VariableMeta
from augur.graph import DirectedEdge, DirectedGraph


def make_window(names, columns, start="2025-01-01T00:00:00+00:00"):
    """Build a window from per-variable columns (lists of floats)."""
    t0 = datetime.fromisoformat(start)
    length = len(columns[0])
    timestamps = tuple(t0 + timedelta(minutes=i) for i in range(length))
    values = np.column_stack([np.asarray(c, dtype=float) for c in columns])
    variables = tuple(VariableMeta(name=n) for n in names)
    return TimeSeriesWindow(timestamps=timestamps, values=values, variables=variables)


def graph_of(nodes, pairs, **edge_kwargs):
    return DirectedGraph(
        nodes=tuple(nodes),
        edges=tuple(DirectedEdge(a, b, **edge_kwargs) for a, b in pairs),
    )


def _has_cycle(nodes, pairs):
    adj = {n: [] for n in nodes}
    for a, b in pairs:
        adj[a].append(b)
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {n: WHITE for n in nodes}

    def visit(n):
        color[n] = GRAY
        for m in adj[n]:
            if color[m] == GRAY:
                return True
            if color[m] == WHITE and visit(m):
                return True
        color[n] = BLACK
        return False

    return any(color[n] == WHITE and visit(n) for n in nodes)


def all_dags(nodes):
    """Every DAG over the given labeled nodes (3^C(n,2) orientations, filtered)."""
    nodes = tuple(nodes)
    slots = list(itertools.combinations(nodes, 2))
    for choice in itertools.product((0, 1, 2), repeat=len(slots)):
        pairs = []
        for (a, b), c in zip(slots, choice):
            if c == 1:
                pairs.append((a, b))
            elif c == 2:
                pairs.append((b, a))
        if not _has_cycle(nodes, pairs):
            yield graph_of(nodes, pairs)


def random_digraph(rng, n, p=0.35):
    """Arbitrary digraph (cycles and mutual edges allowed, no self-loops)."""
    nodes = tuple(f"v{i}" for i in range(n))
    pairs = [
        (a, b)
        for a in nodes
        for b in nodes
        if a != b and rng.random() < p
    ]
    correlations = {pair: round(float(rng.uniform(-1, 1)), 3) for pair in pairs}
    edges = tuple(
        DirectedEdge(a, b, correlation=correlations[(a, b)]) for a, b in pairs
    )
    return DirectedGraph(nodes=nodes, edges=edges)


def random_dag(rng, n, p=0.4):
    """Random DAG: order the nodes, keep only forward edges."""
    nodes = [f"v{i}" for i in range(n)]
    order = list(nodes)
    rng.shuffle(order)
    pairs = [
        (order[i], order[j])
        for i in range(n)
        for j in range(i + 1, n)
        if rng.random() < p
    ]
    return graph_of(nodes, pairs)


def random_binary_net(rng, n, p=0.4):
    """Random binary Bayes net with probabilities bounded away from 0 and 1."""
    g = random_dag(rng, n, p)
    cpts = {}
    for var in g.nodes:
        parents = g.parents(var)
        table = {}
        for assignment in itertools.product((0, 1), repeat=len(parents)):
            p1 = float(rng.uniform(0.05, 0.95))
            table[assignment] = (1.0 - p1, p1)
        cpts[var] = table
    return DiscreteBayesNet(
        graph=g, cardinalities={v: 2 for v in g.nodes}, cpts=cpts
    )


def _descendants(g, node):
    out = set()
    frontier = [node]
    while frontier:
        cur = frontier.pop()
        for child in g.children(cur):
            if child not in out:
                out.add(child)
                frontier.append(child)
    return out


def brute_d_separated(g, X, Y, Z):
    """Path-enumeration d-separation: true iff no undirected simple path
    between X and Y is active given Z."""
    X, Y, Z = set(X), set(Y), set(Z)
    directed = set(g.edge_pairs)
    neighbors = {n: set() for n in g.nodes}
    for a, b in directed:
        neighbors[a].add(b)
        neighbors[b].add(a)

    def active(path):
        for i in range(1, len(path) - 1):
            prev, mid, nxt = path[i - 1], path[i], path[i + 1]
            collider = (prev, mid) in directed and (nxt, mid) in directed
            if collider:
                if mid not in Z and not (_descendants(g, mid) & Z):
                    return False
            else:
                if mid in Z:
                    return False
        return True

    def paths(a, b):
        stack = [(a, [a])]
        while stack:
            cur, path = stack.pop()
            if cur == b:
                yield path
                continue
            for nb in neighbors[cur]:
                if nb not in path:
                    stack.append((nb, path + [nb]))

    for x in X:
        for y in Y:
            for path in paths(x, y):
                if active(path):
                    return False
    return True


def enumerate_assignments(net):
    names = list(net.graph.nodes)
    cards = [net.cardinalities[v] for v in names]
    for combo in itertools.product(*(range(c) for c in cards)):
        yield dict(zip(names, combo))


def assignment_prob(net, assignment, do=None):
    """∏ P(v | parents(v)), with intervened variables replaced by indicators."""
    do = do or {}
    prob = 1.0
    for var in net.graph.nodes:
        value = assignment[var]
        if var in do:
            prob *= 1.0 if value == do[var] else 0.0
            continue
        parents = net.parent_order(var)
        key = tuple(assignment[p] for p in parents)
        prob *= net.cpts[var][key][value]
    return prob


def truncated_factorization(net, X, x, Y):
    """P(Y | do(X=x)) by brute-force enumeration."""
    card_y = net.cardinalities[Y]
    dist = [0.0] * card_y
    for assignment in enumerate_assignments(net):
        dist[assignment[Y]] += assignment_prob(net, assignment, do={X: x})
    return dist


def joint_marginal(net, query):
    """P(query-assignment) by brute-force enumeration; query is a dict."""
    total = 0.0
    for assignment in enumerate_assignments(net):
        if all(assignment[k] == v for k, v in query.items()):
            total += assignment_prob(net, assignment)
    return total


def turbine_case_dag():
    """Worked wind-turbine telemetry example: weather and operational
    variables driving active power (Patv) and the temperatures/humidity
    downstream of it."""
    nodes = (
        "Sp", "Wspd", "Wspd_w", "Wdir", "Etmp", "T2m", "Wdir_w",
        "Itmp", "RelH", "Patv", "Pab",
    )
    pairs = [
        ("Sp", "Etmp"), ("Sp", "RelH"), ("Sp", "Patv"),
        ("Wspd", "Patv"), ("Wspd", "Wspd_w"), ("Wspd", "Pab"),
        ("Wspd_w", "Patv"), ("Wspd_w", "Itmp"), ("Wspd_w", "RelH"),
        ("Wdir", "Patv"),
        ("Etmp", "T2m"), ("Etmp", "Itmp"), ("Etmp", "Wdir_w"),
        ("Etmp", "RelH"), ("Etmp", "Patv"),
        ("T2m", "Itmp"), ("T2m", "RelH"),
        ("Itmp", "RelH"),
        ("Wdir_w", "Itmp"), ("Wdir_w", "RelH"),
        ("Patv", "Itmp"),
    ]
    return graph_of(nodes, pairs)
