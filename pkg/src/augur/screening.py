"""Rank-correlation screening of variable pairs.

Scores every unordered variable pair of a window, keeps the strongest
candidates (optionally after thresholding), and builds the target-centred
undirected candidate graph used to seed causal judgment.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import stats as sps

from .dataset import TimeSeriesWindow

__all__ = [
    "METHODS",
    "CandidatePair",
    "UndirectedCandidateGraph",
    "ranks",
    "correlation",
    "top_k_pairs",
    "prune",
    "build_candidate_graph",
    "correlation_matrix",
    "write_correlation_csv",
]

METHODS = ("spearman", "pearson", "kendall")


@dataclass(frozen=True)
class CandidatePair:
    """An unordered variable pair with its screening correlation."""

    first: str
    second: str
    correlation: float
    method: str

    def __post_init__(self):
        if self.first == self.second:
            raise ValueError("pair endpoints must differ")


@dataclass(frozen=True)
class UndirectedCandidateGraph:
    """Undirected candidate structure; edges carry their correlation."""

    nodes: frozenset[str]
    edges: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self):
        for (a, b) in self.edges:
            if a == b:
                raise ValueError("self-loops are not allowed")
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge endpoint outside node set: ({a}, {b})")

    @property
    def edge_count(self) -> int:
        return len(self.edges)


def ranks(values: Sequence[float]) -> np.ndarray:
    """Average ranks (1-based); ties share the mean of their positions."""
    values = np.asarray(values, dtype=float)
    if values.size < 1:
        raise ValueError("ranks requires at least one value")
    return sps.rankdata(values, method="average")


def _check_pair(a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("inputs must be equal-length 1-d sequences")
    if a.size < 2:
        raise ValueError("correlation requires length >= 2")
    return a, b


def correlation(a: Sequence[float], b: Sequence[float], method: str = "spearman") -> float:
    """Correlation of two equal-length series.

    spearman: Pearson correlation of average ranks; pearson: plain product
    moment; kendall: tau-b (tie corrected). A zero-variance input yields
    0.0 so degenerate pairs drop out of top-K selection.
    """
    if method not in METHODS:
        raise ValueError(f"unknown method {method!r}; expected one of {METHODS}")
    a, b = _check_pair(a, b)
    if np.all(a == a[0]) or np.all(b == b[0]):
        return 0.0
    if method == "pearson":
        return float(np.corrcoef(a, b)[0, 1])
    if method == "spearman":
        return float(np.corrcoef(ranks(a), ranks(b))[0, 1])
    tau = sps.kendalltau(a, b, variant="b").statistic
    return float(tau)


def _scored_pairs(window: TimeSeriesWindow, method: str) -> list[CandidatePair]:
    names = window.names
    out = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            first, second = sorted((names[i], names[j]))
            rho = correlation(window.column(first), window.column(second), method)
            out.append(CandidatePair(first, second, rho, method))
    return out


def _sorted_pairs(pairs: list[CandidatePair]) -> list[CandidatePair]:
    # Deterministic: |rho| descending, then lexicographic on names.
    return sorted(pairs, key=lambda p: (-abs(p.correlation), p.first, p.second))


def top_k_pairs(window: TimeSeriesWindow, k: int, method: str = "spearman") -> list[CandidatePair]:
    """The K unordered pairs with the largest absolute correlation."""
    if k < 0:
        raise ValueError("k must be >= 0")
    return _sorted_pairs(_scored_pairs(window, method))[:k]


def prune(
    window: TimeSeriesWindow,
    k: int,
    tau: float = 0.0,
    method: str = "spearman",
) -> list[CandidatePair]:
    """Threshold at |rho| >= tau, then keep the top K survivors.

    tau = 0 reduces to :func:`top_k_pairs`.
    """
    if k < 0:
        raise ValueError("k must be >= 0")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    survivors = [p for p in _scored_pairs(window, method) if abs(p.correlation) >= tau]
    return _sorted_pairs(survivors)[:k]


def build_candidate_graph(
    window: TimeSeriesWindow,
    target: str,
    tau: float = 0.8,
    top_target: int = 5,
    method: str = "spearman",
) -> UndirectedCandidateGraph:
    """Target-centred candidate graph.

    Three steps: (i) link the target to its ``top_target`` strongest
    neighbours by |rho|; (ii) add edges among non-target variables with
    |rho| >= tau; (iii) keep only the connected component containing the
    target.
    """
    names = window.names
    if target not in names:
        raise ValueError(f"unknown target {target!r}")
    if not 0.0 <= tau <= 1.0:
        raise ValueError("tau must be in [0, 1]")
    if top_target < 0:
        raise ValueError("top_target must be >= 0")

    edges: dict[tuple[str, str], float] = {}

    target_col = window.column(target)
    scored = [
        (name, correlation(target_col, window.column(name), method))
        for name in names
        if name != target
    ]
    scored.sort(key=lambda item: (-abs(item[1]), item[0]))
    for name, rho in scored[:top_target]:
        edges[tuple(sorted((target, name)))] = rho

    others = [n for n in names if n != target]
    for i in range(len(others)):
        for j in range(i + 1, len(others)):
            a, b = sorted((others[i], others[j]))
            rho = correlation(window.column(a), window.column(b), method)
            if abs(rho) >= tau:
                edges[(a, b)] = rho

    # connected component containing the target
    adjacency: dict[str, set[str]] = {n: set() for n in names}
    for (a, b) in edges:
        adjacency[a].add(b)
        adjacency[b].add(a)
    component = {target}
    frontier = [target]
    while frontier:
        node = frontier.pop()
        for neighbour in adjacency[node]:
            if neighbour not in component:
                component.add(neighbour)
                frontier.append(neighbour)

    kept = {pair: rho for pair, rho in edges.items() if pair[0] in component}
    return UndirectedCandidateGraph(nodes=frozenset(component), edges=kept)


def correlation_matrix(
    window: TimeSeriesWindow, method: str = "spearman"
) -> tuple[list[str], np.ndarray]:
    """Square correlation matrix over all window variables."""
    names = window.names
    n = len(names)
    matrix = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            rho = correlation(window.values[:, i], window.values[:, j], method)
            matrix[i, j] = matrix[j, i] = rho
    return names, matrix


def write_correlation_csv(
    window: TimeSeriesWindow, path: str | Path, method: str = "spearman"
) -> None:
    """Write the correlation matrix as CSV with name header row/column."""
    names, matrix = correlation_matrix(window, method)
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([""] + names)
        for name, row in zip(names, matrix):
            writer.writerow([name] + [f"{v:.6f}" for v in row])
